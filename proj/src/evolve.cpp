#include "ncopt/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "ncopt/tissue.hpp"

namespace ncopt {

GeneBounds default_bounds(int n_species) {
    if (n_species < 1 || n_species > 2)
        throw std::invalid_argument("n_species must be 1 or 2");
    GeneBounds bounds;
    for (int s = 0; s < n_species; ++s) {
        const std::string suffix = n_species == 1 ? "" : "_np" + std::to_string(s + 1);
        bounds.push_back({"D" + suffix, 1e-8, 1e-6, true});
        bounds.push_back({"ka" + suffix, 1e3, 1e6, true});
        bounds.push_back({"np0" + suffix, 1e4, 1e6, true});
        bounds.push_back({"e" + suffix, 1e2, 1e4, true});
    }
    return bounds;
}

namespace evolve {

namespace {

// Stream tags keeping the derived seed spaces of unrelated draws apart.
constexpr std::uint64_t kStreamInit = 0x494e4954;     // population init
constexpr std::uint64_t kStreamBreed = 0x42524544;    // selection/crossover/mutation
constexpr std::uint64_t kStreamScenario = 0x5343454e; // per-generation scenario picks
constexpr std::uint64_t kStreamEval = 0x4556414c;     // per-evaluation simulation seeds

void check_bounds(const GeneBounds& bounds) {
    if (bounds.empty()) throw std::invalid_argument("empty gene bounds");
    for (const Gene& g : bounds) {
        if (!(g.lower < g.upper)) throw std::invalid_argument("gene lower must be < upper");
        if (g.log_scale && g.lower <= 0.0)
            throw std::invalid_argument("log-scale gene needs positive bounds");
    }
}

} // namespace

std::vector<Individual> init_population(const GeneBounds& bounds,
                                        const EvolveConfig& config, Rng& rng) {
    check_bounds(bounds);
    if (config.population < 2) throw std::invalid_argument("population must be >= 2");
    std::vector<Individual> pop(config.population);
    for (Individual& ind : pop) {
        ind.genes.reserve(bounds.size());
        for (const Gene& g : bounds) {
            double v;
            if (g.log_scale) {
                std::uniform_real_distribution<double> u(std::log(g.lower),
                                                         std::log(g.upper));
                v = std::exp(u(rng));
            } else {
                std::uniform_real_distribution<double> u(g.lower, g.upper);
                v = u(rng);
            }
            ind.genes.push_back(std::clamp(v, g.lower, g.upper));
        }
    }
    return pop;
}

const Individual& tournament_select(const std::vector<Individual>& population,
                                    int tournament_size, Rng& rng) {
    if (population.empty()) throw std::invalid_argument("empty population");
    if (tournament_size < 1) throw std::invalid_argument("tournament size must be >= 1");
    std::uniform_int_distribution<std::size_t> pick(0, population.size() - 1);
    std::size_t best = pick(rng);
    for (int t = 1; t < tournament_size; ++t) {
        const std::size_t i = pick(rng);
        if (population[i].fitness > population[best].fitness ||
            (population[i].fitness == population[best].fitness && i < best))
            best = i;
    }
    return population[best];
}

Individual crossover(const Individual& a, const Individual& b, Rng& rng) {
    if (a.genes.size() != b.genes.size())
        throw std::invalid_argument("crossover: gene count mismatch");
    Individual child;
    child.genes.resize(a.genes.size());
    for (std::size_t i = 0; i < a.genes.size(); ++i)
        child.genes[i] = uniform01(rng) < 0.5 ? a.genes[i] : b.genes[i];
    return child;
}

Individual mutate(const Individual& ind, const GeneBounds& bounds,
                  const EvolveConfig& config, Rng& rng) {
    Individual out;
    out.genes = ind.genes;
    if (uniform01(rng) >= config.mutation_prob) return out;
    std::uniform_int_distribution<std::size_t> pick(0, out.genes.size() - 1);
    const std::size_t g = pick(rng);
    std::uniform_real_distribution<double> step(-config.mutation_step,
                                                config.mutation_step);
    out.genes[g] = std::clamp(out.genes[g] * (1.0 + step(rng)), bounds[g].lower,
                              bounds[g].upper);
    return out;
}

namespace {

std::vector<EvalRecord> evaluate_all(const std::vector<Individual>& pop,
                                     const Evaluator& evaluator, int generation,
                                     int jobs) {
    std::vector<EvalRecord> records(pop.size());
    if (jobs <= 1) {
        for (std::size_t i = 0; i < pop.size(); ++i)
            records[i] = evaluator(pop[i].genes, generation, static_cast<int>(i));
        return records;
    }
    // Deterministic parallel map: each evaluation depends only on
    // (genes, generation, index), so scheduling cannot change results.
    std::vector<std::thread> workers;
    const int n_workers = std::min<std::size_t>(jobs, pop.size());
    for (int w = 0; w < n_workers; ++w) {
        workers.emplace_back([&, w] {
            for (std::size_t i = w; i < pop.size(); i += n_workers)
                records[i] = evaluator(pop[i].genes, generation, static_cast<int>(i));
        });
    }
    for (auto& t : workers) t.join();
    return records;
}

void apply_record(Individual& ind, const EvalRecord& rec) {
    ind.fitness = rec.fitness;
    ind.evaluated = true;
    ind.penalized = rec.penalized;
    ind.dose_mg_kg = rec.dose_mg_kg;
    ind.cc_frac = rec.cc_frac;
    ind.csc_frac = rec.csc_frac;
}

} // namespace

EvolutionRun run(const EvolveConfig& config, const GeneBounds& bounds,
                 const Evaluator& evaluator) {
    check_bounds(bounds);
    if (config.generations < 1) throw std::invalid_argument("generations must be >= 1");

    Rng init_rng(derive_seed(config.master_seed, kStreamInit));
    std::vector<Individual> pop = init_population(bounds, config, init_rng);

    EvolutionRun run;
    bool have_best = false;

    for (int gen = 0; gen < config.generations; ++gen) {
        const std::vector<EvalRecord> records =
            evaluate_all(pop, evaluator, gen, config.jobs);
        for (std::size_t i = 0; i < pop.size(); ++i) apply_record(pop[i], records[i]);
        run.audit.insert(run.audit.end(), records.begin(), records.end());

        std::size_t gen_best = 0;
        double sum = 0.0, lo = pop[0].fitness;
        for (std::size_t i = 0; i < pop.size(); ++i) {
            sum += pop[i].fitness;
            lo = std::min(lo, pop[i].fitness);
            if (pop[i].fitness > pop[gen_best].fitness) gen_best = i;
        }
        // The best-so-far record keeps the score from the generation where it
        // was achieved; the elite is still re-evaluated each generation.
        if (!have_best || pop[gen_best].fitness > run.best.fitness) {
            run.best = pop[gen_best];
            have_best = true;
        }
        run.history.push_back({gen, pop[gen_best].fitness, sum / pop.size(), lo,
                               pop[gen_best], run.best.fitness});

        if (gen + 1 == config.generations) break;

        Rng breed_rng(derive_seed(config.master_seed, kStreamBreed, gen));
        if (config.replacement == ReplacementMode::Generational) {
            std::vector<Individual> next;
            next.reserve(pop.size());
            Individual elite;
            elite.genes = pop[gen_best].genes; // carried unchanged, re-evaluated
            next.push_back(elite);
            while (next.size() < pop.size()) {
                const Individual& a = tournament_select(pop, config.tournament, breed_rng);
                const Individual& b = tournament_select(pop, config.tournament, breed_rng);
                next.push_back(mutate(crossover(a, b, breed_rng), bounds, config, breed_rng));
            }
            pop = std::move(next);
        } else {
            // Steady state: each event breeds one child and replaces the
            // loser of a replacement tournament (the current best is safe).
            std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
            for (std::size_t ev = 0; ev < pop.size(); ++ev) {
                const Individual& a = tournament_select(pop, config.tournament, breed_rng);
                const Individual& b = tournament_select(pop, config.tournament, breed_rng);
                Individual child =
                    mutate(crossover(a, b, breed_rng), bounds, config, breed_rng);
                std::size_t victim = pick(breed_rng);
                for (int t = 1; t < config.tournament; ++t) {
                    const std::size_t i = pick(breed_rng);
                    if (pop[i].fitness < pop[victim].fitness) victim = i;
                }
                if (victim != gen_best) pop[victim] = std::move(child);
            }
        }
    }
    return run;
}

std::vector<NanoparticleDesign> designs_from_genes(const std::vector<double>& genes,
                                                   double fixed_dissoc_rate,
                                                   double fixed_internal_rate) {
    if (genes.size() % 4 != 0 || genes.empty() || genes.size() > 8)
        throw std::invalid_argument("gene vector must hold 4 genes per species");
    std::vector<NanoparticleDesign> designs;
    for (std::size_t s = 0; s < genes.size() / 4; ++s) {
        NanoparticleDesign d;
        d.diffusion_cm2_s = genes[4 * s + 0];
        d.binding_rate_per_molar_s = genes[4 * s + 1];
        d.extravasated_count = genes[4 * s + 2];
        d.payload_count = genes[4 * s + 3];
        d.dissoc_rate_per_s = fixed_dissoc_rate;
        d.internal_rate_per_s = fixed_internal_rate;
        designs.push_back(d);
    }
    return designs;
}

Evaluator make_tissue_evaluator(const TissueEvalParams& params,
                                const EvolveConfig& config) {
    if (params.scenario_pool.empty())
        throw std::invalid_argument("evaluator needs at least one scenario");
    return [params, config](const std::vector<double>& genes, int generation,
                            int index) -> EvalRecord {
        EvalRecord rec;
        rec.generation = generation;
        rec.individual = index;
        rec.genes = genes;
        rec.cc_frac = 0.0;
        rec.csc_frac = 0.0;
        rec.penalized = false;
        rec.simulated = false;

        const std::vector<NanoparticleDesign> designs = designs_from_genes(
            genes, params.fixed_dissoc_rate, params.fixed_internal_rate);
        const int ns = static_cast<int>(designs.size());
        double dose_sum = 0.0;
        bool over_cap = false;
        for (const NanoparticleDesign& d : designs) {
            const double dose =
                dosimetry::injected_dose(d, params.drug, params.host, params.geometry);
            rec.dose_mg_kg.push_back(dose);
            dose_sum += dose;
            if (dose > config.dose_cap_mg_kg) over_cap = true;
        }
        if (over_cap) {
            // Toxic dose: penalised without spending a simulation.
            rec.penalized = true;
            rec.fitness = -dose_sum / config.dose_normalizer_mg_kg;
            return rec;
        }

        std::vector<int> scenario_indices;
        if (config.scenario_mode == ScenarioMode::WorstCase) {
            scenario_indices.push_back(0);
        } else {
            Rng scen_rng(derive_seed(config.master_seed, kStreamScenario, generation));
            std::uniform_int_distribution<std::size_t> pick(
                0, params.scenario_pool.size() - 1);
            for (int k = 0; k < config.random_k; ++k)
                scenario_indices.push_back(static_cast<int>(pick(scen_rng)));
        }

        double cc_acc = 0.0, csc_acc = 0.0;
        int n_runs = 0;
        for (std::size_t si = 0; si < scenario_indices.size(); ++si) {
            const Scenario& scen = params.scenario_pool[scenario_indices[si]];
            rec.scenario_ids.push_back(scen.id);
            const TissueSystem sys =
                build_system(scen, designs, params.drug, params.host);
            for (int r = 0; r < config.replicates; ++r) {
                const std::uint64_t seed =
                    derive_seed(derive_seed(config.master_seed, kStreamEval, generation),
                                index, si, r);
                rec.seeds.push_back(seed);
                const auto [state, outcome] =
                    params.backend == TissueBackend::Ssa
                        ? simulate_ssa(sys, seed)
                        : simulate_tau(sys, seed, params.tau_epsilon);
                cc_acc += outcome.cc_fraction();
                csc_acc += outcome.csc_fraction();
                ++n_runs;
            }
        }
        rec.simulated = true;
        rec.cc_frac = cc_acc / n_runs;
        rec.csc_frac = csc_acc / n_runs;
        double kill_term = rec.cc_frac;
        if (params.heterogeneous) kill_term += rec.csc_frac;
        rec.fitness = config.weight_w * kill_term -
                      dose_sum / (ns * config.dose_normalizer_mg_kg);
        return rec;
    };
}

void write_run_log_csv(std::ostream& out, const EvolutionRun& run) {
    if (run.audit.empty()) return;
    const std::size_t n_genes = run.audit.front().genes.size();
    out << "generation,individual";
    for (std::size_t g = 0; g < n_genes; ++g) out << ",gene_" << g;
    out << ",fitness,dose_np1,dose_np2,cc_frac,csc_frac,penalized\n";
    out.precision(12);
    for (const EvalRecord& r : run.audit) {
        out << r.generation << ',' << r.individual;
        for (double g : r.genes) out << ',' << g;
        out << ',' << r.fitness << ',' << (r.dose_mg_kg.size() > 0 ? r.dose_mg_kg[0] : 0.0)
            << ',' << (r.dose_mg_kg.size() > 1 ? r.dose_mg_kg[1] : 0.0) << ','
            << r.cc_frac << ',' << r.csc_frac << ',' << (r.penalized ? 1 : 0) << '\n';
    }
}

void write_summary_csv(std::ostream& out, const EvolutionRun& run) {
    out << "generation,best,mean,min\n";
    out.precision(12);
    for (const GenerationStats& s : run.history)
        out << s.generation << ',' << s.best_so_far << ',' << s.mean << ',' << s.min
            << '\n';
}

} // namespace evolve
} // namespace ncopt
