#include "blocknas/errors.hpp"

namespace blocknas {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return 2;
    case ErrorKind::transport: return 3;
    case ErrorKind::infeasible: return 4;
  }
  return 1;
}

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::transport: return "transport";
    case ErrorKind::infeasible: return "infeasible";
  }
  return "unknown";
}

}  // namespace blocknas
