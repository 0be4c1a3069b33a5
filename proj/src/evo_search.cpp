#include "blocknas/evo_search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "blocknas/errors.hpp"
#include "blocknas/io.hpp"
#include "blocknas/rng.hpp"

namespace blocknas {

using nlohmann::json;

void SearchConfig::validate() const {
  if (population_size < 2 || population_size % 2 != 0)
    throw ConfigurationError("population size must be an even number >= 2");
  if (steps < 1) throw ConfigurationError("steps must be positive");
  if (mutation_prob && !(*mutation_prob >= 0 && *mutation_prob <= 1))
    throw ConfigurationError("mutation probability must lie in [0, 1]");
  if (!(crossover_prob >= 0 && crossover_prob <= 1))
    throw ConfigurationError("crossover probability must lie in [0, 1]");
}

double SearchConfig::effective_mutation_prob(std::size_t num_slots) const {
  if (mutation_prob) return *mutation_prob;
  return num_slots == 0 ? 0.0 : 1.0 / static_cast<double>(num_slots);
}

json SearchConfig::to_json(std::size_t num_slots) const {
  return {{"population_size", population_size},
          {"steps", steps},
          {"mutation_prob", effective_mutation_prob(num_slots)},
          {"crossover_prob", crossover_prob},
          {"rng_seed", rng_seed},
          {"cost_kind", to_string(cost_kind)}};
}

SearchConfig SearchConfig::from_json(const json& doc) {
  SearchConfig c;
  try {
    c.population_size = doc.value("population_size", c.population_size);
    c.steps = doc.value("steps", c.steps);
    if (doc.contains("mutation_prob")) c.mutation_prob = doc["mutation_prob"].get<double>();
    c.crossover_prob = doc.value("crossover_prob", c.crossover_prob);
    c.rng_seed = doc.value("rng_seed", c.rng_seed);
    c.cost_kind = parse_cost_kind(doc.at("cost_kind").get<std::string>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("search config: ") + e.what());
  }
  return c;
}

Objectives objectives_of(const EvaluatedGenome& e, CostKind kind) {
  return {e.surrogate, cost_value(e.cost, kind)};
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<Objectives> objectives_of(const std::vector<EvaluatedGenome>& members, CostKind kind) {
  std::vector<Objectives> out;
  out.reserve(members.size());
  for (const auto& m : members) out.push_back(objectives_of(m, kind));
  return out;
}

EvaluatedGenome make_member(const ModelGenome& g, const Evaluation& e) {
  return {g, e.surrogate, e.cost, 0, 0.0};
}

// Crowded-comparison order: lower rank, then larger crowding, then the
// lexicographically smaller genome.
bool crowded_less(const EvaluatedGenome& a, const EvaluatedGenome& b) {
  if (a.rank != b.rank) return a.rank < b.rank;
  if (a.crowding != b.crowding) return a.crowding > b.crowding;
  return a.genome < b.genome;
}

/// Assigns rank and crowding to every member from a sort over `members`.
std::vector<std::vector<std::size_t>> rank_members(std::vector<EvaluatedGenome>& members, CostKind kind) {
  const auto points = objectives_of(members, kind);
  auto fronts = non_dominated_sort(points);
  for (std::size_t r = 0; r < fronts.size(); ++r) {
    const auto crowd = crowding_distance(points, fronts[r]);
    for (std::size_t i = 0; i < fronts[r].size(); ++i) {
      members[fronts[r][i]].rank = r;
      members[fronts[r][i]].crowding = crowd[i];
    }
  }
  return fronts;
}

// Non-dominated set of every point ever offered, kept sorted by genome.
class Archive {
 public:
  Archive(CostKind kind, std::vector<EvaluatedGenome> members = {})
      : kind_(kind), members_(std::move(members)) {}

  void offer(const EvaluatedGenome& candidate) {
    const Objectives c = objectives_of(candidate, kind_);
    for (const auto& m : members_) {
      if (m.genome == candidate.genome || dominates(objectives_of(m, kind_), c)) return;
    }
    std::erase_if(members_, [&](const EvaluatedGenome& m) { return dominates(c, objectives_of(m, kind_)); });
    auto pos = std::lower_bound(members_.begin(), members_.end(), candidate,
                                [](const EvaluatedGenome& a, const EvaluatedGenome& b) { return a.genome < b.genome; });
    members_.insert(pos, candidate);
  }

  GenerationStats stats(int generation) const {
    GenerationStats s{generation, kInf, kInf, members_.size()};
    for (const auto& m : members_) {
      s.best_surrogate = std::min(s.best_surrogate, m.surrogate);
      s.best_cost = std::min(s.best_cost, cost_value(m.cost, kind_));
    }
    return s;
  }

  const std::vector<EvaluatedGenome>& members() const { return members_; }

 private:
  CostKind kind_;
  std::vector<EvaluatedGenome> members_;
};

std::size_t tournament(const std::vector<EvaluatedGenome>& population, Rng& rng) {
  const auto a = static_cast<std::size_t>(rng.uniform_index(population.size()));
  const auto b = static_cast<std::size_t>(rng.uniform_index(population.size()));
  return crowded_less(population[b], population[a]) ? b : a;
}

void mutate(ModelGenome& g, const SearchSpace& space, double prob, Rng& rng) {
  for (std::size_t n = 0; n < g.choices.size(); ++n) {
    if (rng.bernoulli(prob))
      g.choices[n] = static_cast<std::uint32_t>(rng.uniform_index(space.slots[n].options.size()));
  }
}

}  // namespace

void finalize_front(std::vector<EvaluatedGenome>& front, CostKind kind) {
  std::sort(front.begin(), front.end(), [&](const EvaluatedGenome& a, const EvaluatedGenome& b) {
    const double ca = cost_value(a.cost, kind), cb = cost_value(b.cost, kind);
    if (ca != cb) return ca < cb;
    if (a.surrogate != b.surrogate) return a.surrogate < b.surrogate;
    return a.genome < b.genome;
  });
  const auto points = objectives_of(front, kind);
  std::vector<std::size_t> all(front.size());
  std::iota(all.begin(), all.end(), 0);
  const auto crowd = crowding_distance(points, all);
  for (std::size_t i = 0; i < front.size(); ++i) {
    front[i].rank = 0;
    front[i].crowding = crowd[i];
  }
}

SearchResult evolve(CostEvaluator& evaluator, const SearchConfig& config, const EvolveOptions& options) {
  config.validate();
  if (config.cost_kind != evaluator.kind())
    throw ConfigurationError("search cost kind does not match the evaluator's");
  const SearchSpace& space = evaluator.space();
  const CostKind kind = config.cost_kind;
  const double mutation_prob = config.effective_mutation_prob(space.num_slots());
  const auto pop_size = static_cast<std::size_t>(config.population_size);

  Rng rng(config.rng_seed);
  std::vector<EvaluatedGenome> population;
  Archive archive(kind);
  std::vector<GenerationStats> history;
  std::uint64_t base_queries = 0;
  int generation = 0;

  if (options.resume_from) {
    const SearchCheckpoint& cp = *options.resume_from;
    if (cp.space_name != space.name)
      throw ConsistencyError("checkpoint is for space '" + cp.space_name + "'");
    if (cp.config.to_json(space.num_slots()) != config.to_json(space.num_slots()))
      throw ConsistencyError("checkpoint was written with a different search configuration");
    rng.load_state(cp.rng_state);
    generation = cp.generation;
    population = cp.population;
    archive = Archive(kind, cp.archive);
    history = cp.history;
    base_queries = cp.cost_queries;
    for (const auto& m : population) evaluator.seed(m.genome, {m.surrogate, m.cost});
  }
  const std::uint64_t start_queries = evaluator.queries();

  // State at the start of the current generation, for checkpoints.
  auto snapshot = [&](const std::string& rng_state) {
    SearchCheckpoint cp;
    cp.space_name = space.name;
    cp.config = config;
    cp.config.mutation_prob = mutation_prob;
    cp.generation = generation;
    cp.rng_state = rng_state;
    cp.population = population;
    cp.archive = archive.members();
    cp.history = history;
    cp.cost_queries = base_queries + (evaluator.queries() - start_queries);
    return cp;
  };

  auto evaluate_or_checkpoint = [&](const std::vector<ModelGenome>& genomes, const std::string& rng_state) {
    try {
      return evaluator.evaluate_batch(genomes);
    } catch (const TransportError& e) {
      if (!options.checkpoint_path) throw;
      write_file_atomic(*options.checkpoint_path, dump_json(snapshot(rng_state).to_json()));
      throw TransportError(std::string(e.what()) + "; checkpoint written to " +
                           options.checkpoint_path->string());
    }
  };

  if (generation == 0) {
    const std::string rng_state = rng.save_state();
    std::vector<ModelGenome> genomes;
    genomes.reserve(pop_size);
    for (std::size_t i = 0; i < pop_size; ++i) genomes.push_back(random_genome(space, rng));
    const auto evals = evaluate_or_checkpoint(genomes, rng_state);
    population.clear();
    for (std::size_t i = 0; i < pop_size; ++i) population.push_back(make_member(genomes[i], evals[i]));
    const auto fronts = rank_members(population, kind);
    for (std::size_t idx : fronts.front()) archive.offer(population[idx]);
    history.push_back(archive.stats(0));
    generation = 1;
  }

  for (; generation <= config.steps; ++generation) {
    const std::string rng_state = rng.save_state();

    std::vector<ModelGenome> offspring;
    offspring.reserve(pop_size);
    while (offspring.size() < pop_size) {
      ModelGenome a = population[tournament(population, rng)].genome;
      ModelGenome b = population[tournament(population, rng)].genome;
      if (rng.bernoulli(config.crossover_prob)) {
        for (std::size_t n = 0; n < a.choices.size(); ++n) {
          if (rng.bernoulli(0.5)) std::swap(a.choices[n], b.choices[n]);
        }
      }
      mutate(a, space, mutation_prob, rng);
      mutate(b, space, mutation_prob, rng);
      offspring.push_back(std::move(a));
      offspring.push_back(std::move(b));
    }
    const auto evals = evaluate_or_checkpoint(offspring, rng_state);

    std::vector<EvaluatedGenome> combined = population;
    for (std::size_t i = 0; i < offspring.size(); ++i) combined.push_back(make_member(offspring[i], evals[i]));
    const auto fronts = rank_members(combined, kind);
    for (std::size_t idx : fronts.front()) archive.offer(combined[idx]);

    std::vector<EvaluatedGenome> next;
    next.reserve(pop_size);
    for (const auto& front : fronts) {
      if (next.size() + front.size() <= pop_size) {
        for (std::size_t idx : front) next.push_back(combined[idx]);
        continue;
      }
      std::vector<EvaluatedGenome> last;
      for (std::size_t idx : front) last.push_back(combined[idx]);
      std::sort(last.begin(), last.end(), crowded_less);
      for (std::size_t i = 0; next.size() < pop_size; ++i) next.push_back(last[i]);
      break;
    }
    population = std::move(next);
    history.push_back(archive.stats(generation));
  }

  SearchResult result;
  result.space_name = space.name;
  result.config = config;
  result.config.mutation_prob = mutation_prob;
  result.front = archive.members();
  finalize_front(result.front, kind);
  result.history = std::move(history);
  result.cost_queries = base_queries + (evaluator.queries() - start_queries);
  return result;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json double_or_inf(double v) { return std::isinf(v) ? json(nullptr) : json(v); }

double read_double_or_inf(const json& j) { return j.is_null() ? kInf : j.get<double>(); }

json member_to_json(const EvaluatedGenome& m) {
  return {{"choices", m.genome.choices},
          {"surrogate", m.surrogate},
          {"macs", m.cost.macs},
          {"params", m.cost.params},
          {"latency_us", m.cost.latency_us ? json(*m.cost.latency_us) : json(nullptr)},
          {"rank", m.rank},
          {"crowding", double_or_inf(m.crowding)}};
}

EvaluatedGenome member_from_json(const json& j) {
  EvaluatedGenome m;
  m.genome.choices = j.at("choices").get<std::vector<std::uint32_t>>();
  m.surrogate = j.at("surrogate").get<double>();
  m.cost.macs = j.at("macs").get<std::uint64_t>();
  m.cost.params = j.value("params", std::uint64_t{0});
  if (j.contains("latency_us") && !j["latency_us"].is_null()) m.cost.latency_us = j["latency_us"].get<double>();
  m.rank = j.value("rank", std::size_t{0});
  m.crowding = j.contains("crowding") ? read_double_or_inf(j["crowding"]) : 0.0;
  return m;
}

json members_to_json(const std::vector<EvaluatedGenome>& ms) {
  json out = json::array();
  for (const auto& m : ms) out.push_back(member_to_json(m));
  return out;
}

std::vector<EvaluatedGenome> members_from_json(const json& j) {
  std::vector<EvaluatedGenome> out;
  for (const auto& m : j) out.push_back(member_from_json(m));
  return out;
}

json history_to_json(const std::vector<GenerationStats>& history) {
  json out = json::array();
  for (const auto& h : history)
    out.push_back({{"generation", h.generation},
                   {"best_surrogate", double_or_inf(h.best_surrogate)},
                   {"best_cost", double_or_inf(h.best_cost)},
                   {"front_size", h.front_size}});
  return out;
}

std::vector<GenerationStats> history_from_json(const json& j) {
  std::vector<GenerationStats> out;
  for (const auto& h : j)
    out.push_back({h.at("generation").get<int>(), read_double_or_inf(h.at("best_surrogate")),
                   read_double_or_inf(h.at("best_cost")), h.at("front_size").get<std::size_t>()});
  return out;
}

}  // namespace

json search_result_to_json(const SearchResult& result) {
  const std::size_t slots = result.front.empty() ? 0 : result.front.front().genome.choices.size();
  return {{"tool_version", tool_version()},
          {"space_name", result.space_name},
          {"config", result.config.to_json(slots)},
          {"front", members_to_json(result.front)},
          {"history", history_to_json(result.history)},
          {"cost_queries", result.cost_queries}};
}

SearchResult search_result_from_json(const json& doc) {
  try {
    SearchResult r;
    r.space_name = doc.at("space_name").get<std::string>();
    r.config = SearchConfig::from_json(doc.at("config"));
    r.front = members_from_json(doc.at("front"));
    r.history = doc.contains("history") ? history_from_json(doc["history"]) : std::vector<GenerationStats>{};
    r.cost_queries = doc.value("cost_queries", std::uint64_t{0});
    if (r.front.empty()) throw ConsistencyError("result has an empty front");
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("search result: ") + e.what());
  }
}

json SearchCheckpoint::to_json() const {
  const std::size_t slots = population.empty() ? 0 : population.front().genome.choices.size();
  return {{"format_version", kCheckpointFormatVersion},
          {"tool_version", blocknas::tool_version()},
          {"space_name", space_name},
          {"config", config.to_json(slots)},
          {"generation", generation},
          {"rng_state", rng_state},
          {"population", members_to_json(population)},
          {"archive", members_to_json(archive)},
          {"history", history_to_json(history)},
          {"cost_queries", cost_queries}};
}

SearchCheckpoint SearchCheckpoint::from_json(const json& doc) {
  try {
    if (doc.at("format_version").get<int>() != kCheckpointFormatVersion)
      throw ParseError("unsupported checkpoint format_version");
    SearchCheckpoint cp;
    cp.space_name = doc.at("space_name").get<std::string>();
    cp.config = SearchConfig::from_json(doc.at("config"));
    cp.generation = doc.at("generation").get<int>();
    cp.rng_state = doc.at("rng_state").get<std::string>();
    cp.population = members_from_json(doc.at("population"));
    cp.archive = members_from_json(doc.at("archive"));
    cp.history = history_from_json(doc.at("history"));
    cp.cost_queries = doc.at("cost_queries").get<std::uint64_t>();
    return cp;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace blocknas
