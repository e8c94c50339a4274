// Command-line front end for the nanocarrier treatment pipeline:
// grow a virtual tumour, sample 1-D tissue scenarios from it, simulate
// nanoparticle transport and cell kill, optimize designs, and re-evaluate
// a solution across a scenario pool.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "ncopt/config.hpp"
#include "ncopt/dosimetry.hpp"
#include "ncopt/evolve.hpp"
#include "ncopt/scenario.hpp"
#include "ncopt/tissue.hpp"
#include "ncopt/tumour.hpp"

namespace fs = std::filesystem;
using namespace ncopt;

namespace {

std::uint64_t resolve_seed(bool seed_given, std::uint64_t seed) {
    if (!seed_given) {
        seed = std::random_device{}();
        std::cout << "seed=" << seed << " (drawn; pass --seed to reproduce)\n";
    }
    return seed;
}

Scenario pick_worst_case(const std::string& which) {
    if (which == "homo") return scenario::worst_case_homogeneous();
    if (which == "hetero") return scenario::worst_case_heterogeneous();
    throw CLI::ValidationError("--worst-case must be homo or hetero");
}

void print_design_summary(const NanoparticleDesign& d, const DrugModel& drug,
                          const HostModel& host, const PenetrationGeometry& geom,
                          int index) {
    const double dose = dosimetry::injected_dose(d, drug, host, geom);
    std::printf("NP%d: D=%.3g cm^2/s  ka=%.3g /(M s)  NP0=%.0f  E=%.0f\n", index,
                d.diffusion_cm2_s, d.binding_rate_per_molar_s, d.extravasated_count,
                d.payload_count);
    std::printf("     dose=%.3f mg/kg  radius=%.2f nm  K_D=%.3g nM  NP_max=%lld\n",
                dose, dosimetry::radius_from_diffusion(d.diffusion_cm2_s),
                dosimetry::dissociation_constant_nM(d.binding_rate_per_molar_s,
                                                    d.dissoc_rate_per_s),
                static_cast<long long>(
                    dosimetry::lethal_threshold(d.payload_count, drug, host.cell_length_m)));
    if (dose > 55.0)
        std::printf("     WARNING: dose %.1f mg/kg exceeds the 55 mg/kg toxicity limit\n",
                    dose);
}

struct SolutionRecord {
    std::vector<double> genes;
    double fitness = 0.0;
};

void write_solution(const std::string& path, const Individual& best,
                    const GeneBounds& bounds, const DrugModel& drug,
                    const HostModel& host, const PenetrationGeometry& geom) {
    std::ofstream f(path);
    f.precision(17);
    f << "n_genes=" << best.genes.size() << "\n";
    for (std::size_t i = 0; i < best.genes.size(); ++i)
        f << bounds[i].name << "=" << best.genes[i] << "\n";
    f << "fitness=" << best.fitness << "\n";
    f << "cc_frac=" << best.cc_frac << "\n";
    f << "csc_frac=" << best.csc_frac << "\n";
    const auto designs = evolve::designs_from_genes(best.genes, 1e-4, 1e-5);
    for (std::size_t s = 0; s < designs.size(); ++s) {
        const std::string tag = "np" + std::to_string(s + 1) + "_";
        f << tag << "dose_mg_kg=" << dosimetry::injected_dose(designs[s], drug, host, geom)
          << "\n";
        f << tag << "radius_nm="
          << dosimetry::radius_from_diffusion(designs[s].diffusion_cm2_s) << "\n";
        f << tag << "kd_nM="
          << dosimetry::dissociation_constant_nM(designs[s].binding_rate_per_molar_s,
                                                 designs[s].dissoc_rate_per_s)
          << "\n";
        f << tag << "np_max="
          << dosimetry::lethal_threshold(designs[s].payload_count, drug,
                                         host.cell_length_m)
          << "\n";
    }
}

SolutionRecord read_solution(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open solution file " + path);
    std::map<std::string, double> kv;
    std::string line;
    while (std::getline(f, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        try {
            kv[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
        } catch (const std::exception&) {
            // non-numeric echo lines are fine to skip
        }
    }
    SolutionRecord rec;
    const int n_genes = static_cast<int>(kv.at("n_genes"));
    const int n_species = n_genes / 4;
    for (int s = 0; s < n_species; ++s) {
        const std::string suffix = n_species == 1 ? "" : "_np" + std::to_string(s + 1);
        rec.genes.push_back(kv.at("D" + suffix));
        rec.genes.push_back(kv.at("ka" + suffix));
        rec.genes.push_back(kv.at("np0" + suffix));
        rec.genes.push_back(kv.at("e" + suffix));
    }
    if (kv.count("fitness")) rec.fitness = kv.at("fitness");
    return rec;
}

int cmd_grow(const PipelineConfig& cfg, std::int64_t target_override, bool with_oxygen) {
    TumourState state(cfg.tumour);
    const std::int64_t target =
        target_override > 0 ? target_override : cfg.tumour.target_cell_count;
    const TumourSnapshot snap = state.grow_until(target);
    fs::create_directories(cfg.out_dir);
    const std::string path = cfg.out_dir + "/snapshot.txt";
    write_snapshot_file(path, snap);
    if (with_oxygen) write_oxygen_file(cfg.out_dir + "/oxygen.txt", snap);

    const auto counts = type_counts(snap);
    std::int64_t cc = 0, csc = 0, vp = 0, nec = 0;
    if (counts.count(AgentType::CC)) cc = counts.at(AgentType::CC);
    if (counts.count(AgentType::CSC)) csc = counts.at(AgentType::CSC);
    if (counts.count(AgentType::VP)) vp = counts.at(AgentType::VP);
    if (counts.count(AgentType::Necrotic)) nec = counts.at(AgentType::Necrotic);
    std::printf("snapshot written to %s\n", path.c_str());
    std::printf("step=%lld CC=%lld CSC=%lld VP=%lld NEC=%lld\n",
                static_cast<long long>(snap.step), static_cast<long long>(cc),
                static_cast<long long>(csc), static_cast<long long>(vp),
                static_cast<long long>(nec));
    if (cc + csc > 0)
        std::printf("CSC fraction of live cells: %.4f\n",
                    static_cast<double>(csc) / static_cast<double>(cc + csc));
    if (snap.stalled) {
        std::printf("growth stalled before reaching target %lld (partial snapshot kept)\n",
                    static_cast<long long>(target));
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"nanocarrier treatment design pipeline"};
    app.require_subcommand(1);
    // global flags are accepted on either side of the subcommand
    app.fallthrough();

    std::string config_path, out_override;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int jobs = 1;
    app.add_option("--config", config_path, "pipeline config file (key=value sections)")
        ->expected(1);
    auto* seed_opt = app.add_option("--seed", seed, "master seed (drawn and printed if omitted)");
    app.add_option("--jobs", jobs, "worker threads for optimize/evaluate");
    app.add_option("--out", out_override, "output directory or file");

    // grow
    auto* grow = app.add_subcommand("grow", "grow a virtual tumour and write a snapshot");
    std::int64_t grow_target = 0;
    grow->add_option("--target", grow_target, "override target live cell count");
    bool grow_oxygen = false;
    grow->add_flag("--oxygen", grow_oxygen, "also write the oxygen field sidecar");

    // sample
    auto* sample = app.add_subcommand("sample", "extract 1-D scenarios from a snapshot");
    std::string sample_snapshot, sample_depth = "22", sample_worst;
    int sample_n = 100;
    sample->add_option("--snapshot", sample_snapshot, "tumour snapshot file");
    sample->add_option("--n", sample_n, "number of scenarios");
    sample->add_option("--depth", sample_depth, "depth in cells, or 'auto'");
    sample->add_option("--worst-case", sample_worst, "emit the fixed worst case: homo|hetero");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "run one tissue simulation");
    std::string sim_scenario_file, sim_worst = "homo", sim_backend = "tau", sim_traj;
    double sim_d = 1e-6, sim_ka = 7e5, sim_np0 = 60000, sim_e = 5000;
    double sim_d2 = 0, sim_ka2 = 0, sim_np02 = 0, sim_e2 = 0;
    double sim_epsilon = 0.03, sim_interval = 600.0;
    simulate->add_option("--scenario", sim_scenario_file, "scenario file (first line used)");
    simulate->add_option("--worst-case", sim_worst, "homo|hetero (when no --scenario)");
    simulate->add_option("--d", sim_d, "NP1 diffusion [cm^2/s]");
    simulate->add_option("--ka", sim_ka, "NP1 binding rate [1/(M s)]");
    simulate->add_option("--np0", sim_np0, "NP1 extravasated count");
    simulate->add_option("--e", sim_e, "NP1 payload molecules");
    simulate->add_option("--d2", sim_d2, "NP2 diffusion (enables two species)");
    simulate->add_option("--ka2", sim_ka2, "NP2 binding rate");
    simulate->add_option("--np02", sim_np02, "NP2 extravasated count");
    simulate->add_option("--e2", sim_e2, "NP2 payload molecules");
    simulate->add_option("--backend", sim_backend, "ssa|tau");
    simulate->add_option("--epsilon", sim_epsilon, "tau-leap accuracy parameter");
    simulate->add_option("--traj", sim_traj, "write trajectory CSV to this path");
    simulate->add_option("--interval", sim_interval, "trajectory sampling interval [s]");

    // optimize
    auto* optimize = app.add_subcommand("optimize", "evolutionary optimization, writes a result bundle");
    std::string opt_scenarios;
    bool opt_mock = false;
    optimize->add_option("--scenarios", opt_scenarios,
                         "scenario pool file (required for scenario_mode=random_k)");
    optimize->add_flag("--mock", opt_mock, "smoke mode: synthetic convex fitness, no simulation");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "re-evaluate a solution on a scenario pool");
    std::string eval_solution, eval_scenarios, eval_backend = "tau";
    int eval_seeds = 1;
    evaluate->add_option("--solution", eval_solution, "best-solution record file")->required();
    evaluate->add_option("--scenarios", eval_scenarios, "scenario pool file")->required();
    evaluate->add_option("--seeds", eval_seeds, "replicate simulations per scenario");
    evaluate->add_option("--backend", eval_backend, "ssa|tau");

    CLI11_PARSE(app, argc, argv);
    seed_given = seed_opt->count() > 0;

    try {
        PipelineConfig cfg =
            config_path.empty() ? config::defaults() : config::load_file(config_path);
        if (!out_override.empty()) cfg.out_dir = out_override;
        const std::uint64_t master_seed = resolve_seed(seed_given || !config_path.empty(),
                                                       seed_given ? seed : cfg.master_seed);
        cfg.master_seed = master_seed;
        cfg.tumour.seed = master_seed;
        cfg.evolve.master_seed = master_seed;
        cfg.evolve.jobs = jobs;

        if (*grow) return cmd_grow(cfg, grow_target, grow_oxygen);

        if (*sample) {
            std::vector<Scenario> scenarios;
            const std::string out_file =
                out_override.empty() ? "scenarios.txt" : out_override;
            if (!sample_worst.empty()) {
                scenarios.push_back(pick_worst_case(sample_worst));
            } else {
                if (sample_snapshot.empty())
                    throw CLI::ValidationError("sample needs --snapshot or --worst-case");
                const TumourSnapshot snap = read_snapshot_file(sample_snapshot);
                int depth;
                if (sample_depth == "auto") {
                    const DepthStats stats = scenario::depth_stats(snap);
                    depth = stats.depth_cells;
                    std::printf("p95=%.1f um depth=%d cells\n", stats.p95_um, depth);
                } else {
                    depth = std::stoi(sample_depth);
                }
                scenarios = scenario::extract_scenarios(snap, sample_n, depth, master_seed);
            }
            scenario::write_scenario_file(out_file, scenarios);
            std::printf("%zu scenario(s) written to %s\n", scenarios.size(),
                        out_file.c_str());
            return 0;
        }

        if (*simulate) {
            Scenario scen;
            if (!sim_scenario_file.empty()) {
                const auto pool = scenario::read_scenario_file(sim_scenario_file);
                if (pool.empty()) throw std::runtime_error("scenario file is empty");
                scen = pool.front();
            } else {
                scen = pick_worst_case(sim_worst);
            }
            std::vector<NanoparticleDesign> designs;
            designs.push_back({sim_d, sim_ka, 1e-4, 1e-5, sim_np0, sim_e});
            if (sim_d2 > 0)
                designs.push_back({sim_d2, sim_ka2, 1e-4, 1e-5, sim_np02, sim_e2});
            for (std::size_t i = 0; i < designs.size(); ++i)
                print_design_summary(designs[i], cfg.drug, cfg.host, cfg.geometry,
                                     static_cast<int>(i) + 1);

            const TissueSystem sys = build_system(scen, designs, cfg.drug, cfg.host);
            std::vector<TrajectorySample> traj;
            TrajectoryOptions topts{sim_interval};
            const bool want_traj = !sim_traj.empty();
            const auto [state, outcome] =
                sim_backend == "ssa"
                    ? simulate_ssa(sys, master_seed, want_traj ? &traj : nullptr, topts)
                    : simulate_tau(sys, master_seed, sim_epsilon,
                                   want_traj ? &traj : nullptr, topts);
            std::printf("scenario %s: CC killed %lld/%lld, CSC killed %lld/%lld\n",
                        scen.id.c_str(), static_cast<long long>(outcome.cc_killed),
                        static_cast<long long>(outcome.cc_total),
                        static_cast<long long>(outcome.csc_killed),
                        static_cast<long long>(outcome.csc_total));
            for (std::size_t i = 0; i < designs.size(); ++i)
                std::printf("NP%zu injected into column: %lld\n", i + 1,
                            static_cast<long long>(outcome.injected_total[i]));
            if (want_traj) {
                std::ofstream f(sim_traj);
                write_trajectory_csv(f, traj);
                std::printf("trajectory written to %s\n", sim_traj.c_str());
            }
            return 0;
        }

        if (*optimize) {
            fs::create_directories(cfg.out_dir);
            const GeneBounds bounds = default_bounds(cfg.heterogeneous ? 2 : 1);

            Evaluator evaluator;
            std::vector<Scenario> pool;
            if (opt_mock) {
                // Synthetic convex objective in normalized log-gene space.
                evaluator = [bounds](const std::vector<double>& genes, int gen,
                                     int idx) -> EvalRecord {
                    EvalRecord r;
                    r.generation = gen;
                    r.individual = idx;
                    r.genes = genes;
                    double d2 = 0.0;
                    for (std::size_t i = 0; i < genes.size(); ++i) {
                        const double lo = std::log(bounds[i].lower),
                                     hi = std::log(bounds[i].upper);
                        const double x = (std::log(genes[i]) - lo) / (hi - lo);
                        const double target = 0.3 + 0.1 * static_cast<double>(i);
                        d2 += (x - target) * (x - target);
                    }
                    r.fitness = -d2;
                    r.penalized = false;
                    r.simulated = false;
                    return r;
                };
            } else {
                if (cfg.evolve.scenario_mode == ScenarioMode::WorstCase) {
                    pool.push_back(cfg.heterogeneous ? scenario::worst_case_heterogeneous()
                                                     : scenario::worst_case_homogeneous());
                } else {
                    if (opt_scenarios.empty())
                        throw std::runtime_error(
                            "scenario_mode=random_k needs --scenarios <pool file>");
                    pool = scenario::read_scenario_file(opt_scenarios);
                }
                evolve::TissueEvalParams params;
                params.scenario_pool = pool;
                params.drug = cfg.drug;
                params.host = cfg.host;
                params.geometry = cfg.geometry;
                params.backend = cfg.tissue_backend == PipelineConfig::Backend::Ssa
                                     ? evolve::TissueBackend::Ssa
                                     : evolve::TissueBackend::Tau;
                params.tau_epsilon = cfg.tau_epsilon;
                params.heterogeneous = cfg.heterogeneous;
                evaluator = evolve::make_tissue_evaluator(params, cfg.evolve);
            }

            const EvolutionRun run = evolve::run(cfg.evolve, bounds, evaluator);
            for (const GenerationStats& s : run.history)
                std::printf("gen %3d  best=%.4f  mean=%.4f  min=%.4f\n", s.generation,
                            s.best_so_far, s.mean, s.min);

            {
                std::ofstream f(cfg.out_dir + "/config_echo.txt");
                config::write(f, cfg);
            }
            if (!pool.empty())
                scenario::write_scenario_file(cfg.out_dir + "/scenarios_used.txt", pool);
            {
                std::ofstream f(cfg.out_dir + "/run_log.csv");
                evolve::write_run_log_csv(f, run);
            }
            {
                std::ofstream f(cfg.out_dir + "/summary.csv");
                evolve::write_summary_csv(f, run);
            }
            write_solution(cfg.out_dir + "/best_solution.txt", run.best, bounds, cfg.drug,
                           cfg.host, cfg.geometry);
            std::printf("bundle written to %s\n", cfg.out_dir.c_str());
            return 0;
        }

        if (*evaluate) {
            const SolutionRecord sol = read_solution(eval_solution);
            const auto pool = scenario::read_scenario_file(eval_scenarios);
            const auto designs = evolve::designs_from_genes(sol.genes, 1e-4, 1e-5);
            const std::string out_file =
                out_override.empty() ? "evaluation.csv" : out_override;
            std::ofstream f(out_file);
            f << "scenario,cc_total,cc_killed,csc_total,csc_killed,cc_frac,csc_frac\n";
            f.precision(12);
            double cc_mean = 0.0, csc_mean = 0.0;
            int full_kill = 0;
            for (std::size_t si = 0; si < pool.size(); ++si) {
                const TissueSystem sys = build_system(pool[si], designs, cfg.drug, cfg.host);
                double cc = 0.0, csc = 0.0;
                for (int r = 0; r < eval_seeds; ++r) {
                    const std::uint64_t s = derive_seed(master_seed, si, r);
                    const auto [state, outcome] =
                        eval_backend == "ssa" ? simulate_ssa(sys, s)
                                              : simulate_tau(sys, s, cfg.tau_epsilon);
                    cc += outcome.cc_fraction();
                    csc += outcome.csc_fraction();
                    if (r == 0)
                        f << pool[si].id << ',' << outcome.cc_total << ','
                          << outcome.cc_killed << ',' << outcome.csc_total << ','
                          << outcome.csc_killed << ',' << outcome.cc_fraction() << ','
                          << outcome.csc_fraction() << '\n';
                }
                cc_mean += cc / eval_seeds;
                csc_mean += csc / eval_seeds;
                if (cc / eval_seeds >= 0.99) ++full_kill;
            }
            if (!pool.empty()) {
                cc_mean /= pool.size();
                csc_mean /= pool.size();
                std::printf("mean CC kill %.4f, mean CSC kill %.4f, >=99%% CC kill in "
                            "%d/%zu scenarios\n",
                            cc_mean, csc_mean, full_kill, pool.size());
            }
            std::printf("evaluation written to %s\n", out_file.c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
