#ifndef NCOPT_EVOLVE_HPP
#define NCOPT_EVOLVE_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ncopt/dosimetry.hpp"
#include "ncopt/rng.hpp"
#include "ncopt/scenario.hpp"

namespace ncopt {

struct Gene {
    std::string name;
    double lower;
    double upper;
    bool log_scale = true;
};

using GeneBounds = std::vector<Gene>;

/// Four genes per nanoparticle species: D, k_a, NP0, E.
GeneBounds default_bounds(int n_species);

struct Individual {
    std::vector<double> genes;
    double fitness = 0.0;
    bool evaluated = false;
    bool penalized = false;
    std::vector<double> dose_mg_kg; // per species
    double cc_frac = 0.0;
    double csc_frac = 0.0;
};

enum class ScenarioMode { WorstCase, RandomK };
enum class ReplacementMode { Generational, SteadyState };

struct EvolveConfig {
    int population = 20;
    int tournament = 2;
    double mutation_prob = 0.2;
    double mutation_step = 0.05; // relative half-width
    int generations = 100;
    double weight_w = 1.0;
    ScenarioMode scenario_mode = ScenarioMode::WorstCase;
    int random_k = 5;
    double dose_normalizer_mg_kg = 250.0; // per species
    double dose_cap_mg_kg = 55.0;         // per species
    int replicates = 1;
    std::uint64_t master_seed = 1;
    ReplacementMode replacement = ReplacementMode::Generational;
    int jobs = 1;
};

struct EvalRecord {
    int generation;
    int individual;
    std::vector<double> genes;
    double fitness;
    std::vector<double> dose_mg_kg;
    double cc_frac, csc_frac;
    bool penalized;
    bool simulated; // audit: penalized individuals trigger no tissue simulation
    std::vector<std::string> scenario_ids;
    std::vector<std::uint64_t> seeds;
};

struct GenerationStats {
    int generation;
    double best, mean, min;
    Individual best_individual;      // best of this generation
    double best_so_far;              // non-decreasing with elitism
};

struct EvolutionRun {
    std::vector<GenerationStats> history;
    Individual best; // best-so-far individual (original score)
    std::vector<EvalRecord> audit;
};

/// Evaluator contract: pure function of (genes, generation, index) so that
/// parallel evaluation is a deterministic map.
using Evaluator = std::function<EvalRecord(const std::vector<double>& genes,
                                           int generation, int index)>;

namespace evolve {

std::vector<Individual> init_population(const GeneBounds& bounds,
                                        const EvolveConfig& config, Rng& rng);

const Individual& tournament_select(const std::vector<Individual>& population,
                                    int tournament_size, Rng& rng);

Individual crossover(const Individual& a, const Individual& b, Rng& rng);

Individual mutate(const Individual& ind, const GeneBounds& bounds,
                  const EvolveConfig& config, Rng& rng);

EvolutionRun run(const EvolveConfig& config, const GeneBounds& bounds,
                 const Evaluator& evaluator);

enum class TissueBackend { Ssa, Tau };

struct TissueEvalParams {
    std::vector<Scenario> scenario_pool; // mode WorstCase uses scenario_pool[0]
    DrugModel drug;
    HostModel host;
    PenetrationGeometry geometry;
    TissueBackend backend = TissueBackend::Tau;
    double tau_epsilon = 0.03;
    double fixed_dissoc_rate = 1e-4;
    double fixed_internal_rate = 1e-5;
    bool heterogeneous = false; // two species, Eq-5-style fitness
};

/// Builds the real fitness evaluator over the tissue module.  Simulation
/// seeds derive from (master_seed, generation, individual, scenario, replicate).
Evaluator make_tissue_evaluator(const TissueEvalParams& params,
                                const EvolveConfig& config);

std::vector<NanoparticleDesign> designs_from_genes(const std::vector<double>& genes,
                                                   double fixed_dissoc_rate,
                                                   double fixed_internal_rate);

void write_run_log_csv(std::ostream& out, const EvolutionRun& run);
void write_summary_csv(std::ostream& out, const EvolutionRun& run);

} // namespace evolve
} // namespace ncopt

#endif
