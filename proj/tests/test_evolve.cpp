#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "ncopt/dosimetry.hpp"
#include "ncopt/evolve.hpp"

using namespace ncopt;
using namespace ncopt::evolve;

namespace {

Individual make_ind(std::vector<double> genes, double fitness) {
    Individual ind;
    ind.genes = std::move(genes);
    ind.fitness = fitness;
    ind.evaluated = true;
    return ind;
}

// Concave mock fitness: negative squared log-distance to a hidden optimum,
// normalized per gene by the log-range.
Evaluator hidden_point_evaluator(const GeneBounds& bounds,
                                 const std::vector<double>& target) {
    return [bounds, target](const std::vector<double>& genes, int generation,
                            int index) {
        EvalRecord rec;
        rec.generation = generation;
        rec.individual = index;
        rec.genes = genes;
        rec.penalized = false;
        rec.simulated = true;
        double d2 = 0.0;
        for (std::size_t i = 0; i < genes.size(); ++i) {
            const double range = std::log(bounds[i].upper / bounds[i].lower);
            const double d = std::log(genes[i] / target[i]) / range;
            d2 += d * d;
        }
        rec.fitness = -d2;
        rec.cc_frac = 0.0;
        rec.csc_frac = 0.0;
        return rec;
    };
}

} // namespace

TEST_CASE("default bounds cover the four design genes per species") {
    const GeneBounds b1 = default_bounds(1);
    REQUIRE(b1.size() == 4);
    CHECK(b1[0].lower == doctest::Approx(1e-8));
    CHECK(b1[0].upper == doctest::Approx(1e-6));
    CHECK(b1[1].lower == doctest::Approx(1e3));
    CHECK(b1[1].upper == doctest::Approx(1e6));
    CHECK(b1[2].lower == doctest::Approx(1e4));
    CHECK(b1[2].upper == doctest::Approx(1e6));
    CHECK(b1[3].lower == doctest::Approx(1e2));
    CHECK(b1[3].upper == doctest::Approx(1e4));
    for (const Gene& g : b1) {
        CHECK(g.lower < g.upper);
        CHECK(g.log_scale);
    }
    CHECK(default_bounds(2).size() == 8);
    CHECK_THROWS(default_bounds(0));
    CHECK_THROWS(default_bounds(3));
}

TEST_CASE("init_population respects bounds and is log-uniform") {
    const GeneBounds bounds = default_bounds(1);
    EvolveConfig cfg;
    cfg.population = 2000;
    Rng rng(11);
    const auto pop = init_population(bounds, cfg, rng);
    REQUIRE(pop.size() == 2000);
    double mean_log_ka = 0.0;
    for (const Individual& ind : pop) {
        REQUIRE(ind.genes.size() == 4);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(ind.genes[i] >= bounds[i].lower);
            CHECK(ind.genes[i] <= bounds[i].upper);
        }
        mean_log_ka += std::log(ind.genes[1]);
    }
    mean_log_ka /= static_cast<double>(pop.size());
    // log-uniform on [1e3, 1e6]: mean of log is the midpoint, 3 sigma band
    const double lo = std::log(1e3), hi = std::log(1e6);
    const double sigma = (hi - lo) / std::sqrt(12.0) / std::sqrt(2000.0);
    CHECK(std::abs(mean_log_ka - 0.5 * (lo + hi)) < 3.0 * sigma);
}

TEST_CASE("init_population determinism and degenerate bounds") {
    const GeneBounds bounds = default_bounds(1);
    EvolveConfig cfg;
    Rng r1(5), r2(5);
    const auto p1 = init_population(bounds, cfg, r1);
    const auto p2 = init_population(bounds, cfg, r2);
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i].genes == p2[i].genes);

    GeneBounds tight{{"x", 1.0, 1.0 + 1e-9, true}};
    Rng r3(1);
    for (const Individual& ind : init_population(tight, cfg, r3))
        CHECK(ind.genes[0] == doctest::Approx(1.0).epsilon(1e-8));

    GeneBounds bad{{"x", 2.0, 1.0, true}};
    Rng r4(1);
    CHECK_THROWS(init_population(bad, cfg, r4));
}

TEST_CASE("tournament selection win rate matches the order-statistics oracle") {
    std::vector<Individual> pop;
    for (int i = 0; i < 20; ++i) pop.push_back(make_ind({double(i)}, i));
    Rng rng(77);
    const int n = 100000;
    int best_wins = 0;
    for (int i = 0; i < n; ++i)
        if (tournament_select(pop, 2, rng).fitness == 19.0) ++best_wins;
    // P(best drawn at least once in 2 picks) = 1 - (19/20)^2 = 0.0975
    CHECK(std::abs(best_wins / double(n) - 0.0975) < 0.005);
}

TEST_CASE("tournament degenerate cases and tie-breaking") {
    std::vector<Individual> two{make_ind({1.0}, 0.9), make_ind({2.0}, 0.1)};
    Rng rng(3);
    // T covering the population always returns the stronger individual
    for (int i = 0; i < 200; ++i)
        CHECK(tournament_select(two, 8, rng).fitness == doctest::Approx(0.9));

    // equal fitness: lower index wins whenever it is drawn
    std::vector<Individual> tie{make_ind({1.0}, 0.5), make_ind({2.0}, 0.5)};
    int first = 0;
    const int n = 2000;
    for (int i = 0; i < n; ++i)
        if (tournament_select(tie, 4, rng).genes[0] == 1.0) ++first;
    CHECK(first / double(n) > 0.9); // loses only if all 4 draws hit index 1

    // T=1 is uniform
    int best = 0;
    for (int i = 0; i < n; ++i)
        if (tournament_select(two, 1, rng).fitness == doctest::Approx(0.9)) ++best;
    CHECK(std::abs(best / double(n) - 0.5) < 0.05);

    CHECK_THROWS(tournament_select({}, 2, rng));
    CHECK_THROWS(tournament_select(two, 0, rng));
}

TEST_CASE("uniform crossover takes each gene from a parent with probability 1/2") {
    const Individual a = make_ind({1.0, 10.0, 100.0, 1000.0}, 0.0);
    const Individual b = make_ind({2.0, 20.0, 200.0, 2000.0}, 0.0);
    Rng rng(9);
    const int n = 10000;
    std::vector<int> from_a(4, 0);
    for (int i = 0; i < n; ++i) {
        const Individual c = crossover(a, b, rng);
        REQUIRE(c.genes.size() == 4);
        for (int g = 0; g < 4; ++g) {
            const bool is_a = c.genes[g] == a.genes[g];
            const bool is_b = c.genes[g] == b.genes[g];
            CHECK((is_a || is_b)); // genes come from a parent, never blended
            if (is_a) ++from_a[g];
        }
    }
    const double sigma = std::sqrt(0.25 / n);
    for (int g = 0; g < 4; ++g)
        CHECK(std::abs(from_a[g] / double(n) - 0.5) < 3.0 * sigma);

    const Individual same = crossover(a, a, rng);
    CHECK(same.genes == a.genes);
}

TEST_CASE("mutation alters at most one gene by at most five percent") {
    const GeneBounds bounds = default_bounds(1);
    const Individual ind = make_ind({1e-7, 3e4, 1e5, 1e3}, 0.0); // mid-range
    EvolveConfig cfg;
    Rng rng(13);
    const int n = 10000;
    int changed = 0;
    for (int i = 0; i < n; ++i) {
        const Individual m = mutate(ind, bounds, cfg, rng);
        int diff = 0;
        for (int g = 0; g < 4; ++g) {
            if (m.genes[g] != ind.genes[g]) {
                ++diff;
                const double rel = m.genes[g] / ind.genes[g] - 1.0;
                CHECK(std::abs(rel) <= 0.05 + 1e-12);
            }
            CHECK(m.genes[g] >= bounds[g].lower);
            CHECK(m.genes[g] <= bounds[g].upper);
        }
        CHECK(diff <= 1);
        if (diff == 1) ++changed;
    }
    const double sigma = std::sqrt(0.2 * 0.8 / n);
    CHECK(std::abs(changed / double(n) - 0.2) < 3.0 * sigma);

    // forced mutation changes exactly one gene
    cfg.mutation_prob = 1.0;
    const Individual m = mutate(ind, bounds, cfg, rng);
    int diff = 0;
    for (int g = 0; g < 4; ++g)
        if (m.genes[g] != ind.genes[g]) ++diff;
    CHECK(diff == 1);

    // clamping at the bound never escapes it
    const Individual at_upper = make_ind({1e-6, 1e6, 1e6, 1e4}, 0.0);
    for (int i = 0; i < 200; ++i) {
        const Individual c = mutate(at_upper, bounds, cfg, rng);
        for (int g = 0; g < 4; ++g) CHECK(c.genes[g] <= bounds[g].upper);
    }
}

TEST_CASE("run converges on a hidden concave optimum with monotone elitism") {
    const GeneBounds bounds = default_bounds(1);
    const std::vector<double> target{3e-7, 5e4, 2e5, 8e2};
    EvolveConfig cfg;
    cfg.master_seed = 21;
    const EvolutionRun run1 = run(cfg, bounds, hidden_point_evaluator(bounds, target));

    REQUIRE(run1.history.size() == 100);
    double prev = -1e300;
    for (const GenerationStats& s : run1.history) {
        CHECK(s.best_so_far >= prev);
        CHECK(s.best >= s.mean);
        CHECK(s.mean >= s.min);
        prev = s.best_so_far;
    }
    CHECK(run1.best.fitness > run1.history.front().best_so_far);

    // final normalized log-distance below 5% of the range per gene (rms)
    double d2 = 0.0;
    for (int g = 0; g < 4; ++g) {
        const double range = std::log(bounds[g].upper / bounds[g].lower);
        const double d = std::log(run1.best.genes[g] / target[g]) / range;
        d2 += d * d;
    }
    CHECK(std::sqrt(d2 / 4.0) < 0.05);

    // audit covers every evaluation
    CHECK(run1.audit.size() == 100 * 20);

    // full reproducibility from the master seed
    const EvolutionRun run2 = run(cfg, bounds, hidden_point_evaluator(bounds, target));
    CHECK(run1.best.genes == run2.best.genes);
    REQUIRE(run1.audit.size() == run2.audit.size());
    for (std::size_t i = 0; i < run1.audit.size(); ++i)
        CHECK(run1.audit[i].fitness == run2.audit[i].fitness);
}

TEST_CASE("a single generation just evaluates the initial population") {
    const GeneBounds bounds = default_bounds(1);
    EvolveConfig cfg;
    cfg.generations = 1;
    const std::vector<double> target{1e-7, 1e4, 1e5, 1e3};
    const EvolutionRun r = run(cfg, bounds, hidden_point_evaluator(bounds, target));
    REQUIRE(r.history.size() == 1);
    CHECK(r.audit.size() == 20);
    double best = -1e300;
    for (const EvalRecord& rec : r.audit) best = std::max(best, rec.fitness);
    CHECK(r.best.fitness == doctest::Approx(best));
}

TEST_CASE("steady state replacement also improves and keeps the best alive") {
    const GeneBounds bounds = default_bounds(1);
    EvolveConfig cfg;
    cfg.replacement = ReplacementMode::SteadyState;
    cfg.generations = 40;
    const std::vector<double> target{3e-7, 5e4, 2e5, 8e2};
    const EvolutionRun r = run(cfg, bounds, hidden_point_evaluator(bounds, target));
    double prev = -1e300;
    for (const GenerationStats& s : r.history) {
        CHECK(s.best_so_far >= prev);
        prev = s.best_so_far;
    }
    CHECK(r.best.fitness > r.history.front().best);
}

TEST_CASE("toxic doses are penalized without running a simulation") {
    TissueEvalParams params;
    params.scenario_pool = {scenario::worst_case_homogeneous()};
    const EvolveConfig cfg;
    const Evaluator eval = make_tissue_evaluator(params, cfg);

    const std::vector<double> genes{1e-6, 7e5, 1e6, 1e4}; // NP0*E = 1e10
    NanoparticleDesign d;
    d.extravasated_count = 1e6;
    d.payload_count = 1e4;
    const double dose =
        dosimetry::injected_dose(d, params.drug, params.host, params.geometry);
    REQUIRE(dose > cfg.dose_cap_mg_kg);

    const EvalRecord rec = eval(genes, 0, 0);
    CHECK(rec.penalized);
    CHECK_FALSE(rec.simulated);
    CHECK(rec.seeds.empty());
    CHECK(rec.fitness == doctest::Approx(-dose / cfg.dose_normalizer_mg_kg));
    CHECK(rec.fitness < 0.0);
}

TEST_CASE("fitness arithmetic: full kill and zero kill") {
    // one vessel, one cell: the whole injection targets a single cell
    Scenario sc;
    sc.id = "pair";
    sc.compartments = {CompartmentKind::VP, CompartmentKind::CC};
    TissueEvalParams params;
    params.scenario_pool = {sc};
    const EvolveConfig cfg;
    const Evaluator eval = make_tissue_evaluator(params, cfg);

    const std::vector<double> strong{1e-6, 7e5, 60000, 5000};
    NanoparticleDesign d;
    d.extravasated_count = 60000;
    d.payload_count = 5000;
    const double dose =
        dosimetry::injected_dose(d, params.drug, params.host, params.geometry);
    const EvalRecord full = eval(strong, 0, 0);
    CHECK(full.simulated);
    CHECK_FALSE(full.penalized);
    CHECK(full.cc_frac == doctest::Approx(1.0));
    CHECK(full.fitness ==
          doctest::Approx(cfg.weight_w * 1.0 - dose / cfg.dose_normalizer_mg_kg));
    CHECK(full.scenario_ids == std::vector<std::string>{"pair"});
    CHECK(full.seeds.size() == 1);

    // minimum dose with a lethal threshold far above anything deliverable
    const std::vector<double> weak{1e-8, 1e3, 1e4, 1e2};
    NanoparticleDesign w;
    w.extravasated_count = 1e4;
    w.payload_count = 1e2;
    const double weak_dose =
        dosimetry::injected_dose(w, params.drug, params.host, params.geometry);
    const EvalRecord zero = eval(weak, 0, 1);
    CHECK(zero.simulated);
    CHECK(zero.cc_frac == doctest::Approx(0.0));
    CHECK(zero.fitness == doctest::Approx(-weak_dose / cfg.dose_normalizer_mg_kg));
}

TEST_CASE("designs_from_genes maps gene blocks onto species") {
    const std::vector<double> g8{1e-6, 7e5, 6e4, 5e3, 5e-7, 2e5, 9e5, 4e2};
    const auto designs = designs_from_genes(g8, 1e-4, 1e-5);
    REQUIRE(designs.size() == 2);
    CHECK(designs[0].diffusion_cm2_s == doctest::Approx(1e-6));
    CHECK(designs[0].binding_rate_per_molar_s == doctest::Approx(7e5));
    CHECK(designs[0].extravasated_count == doctest::Approx(6e4));
    CHECK(designs[0].payload_count == doctest::Approx(5e3));
    CHECK(designs[1].diffusion_cm2_s == doctest::Approx(5e-7));
    CHECK(designs[1].payload_count == doctest::Approx(4e2));
    for (const NanoparticleDesign& d : designs) {
        CHECK(d.dissoc_rate_per_s == doctest::Approx(1e-4));
        CHECK(d.internal_rate_per_s == doctest::Approx(1e-5));
    }
    CHECK(designs_from_genes({1e-6, 7e5, 6e4, 5e3}, 1e-4, 1e-5).size() == 1);
    CHECK_THROWS(designs_from_genes({}, 1e-4, 1e-5));
    CHECK_THROWS(designs_from_genes({1.0, 2.0, 3.0}, 1e-4, 1e-5));
    CHECK_THROWS(designs_from_genes(std::vector<double>(12, 1.0), 1e-4, 1e-5));
}

TEST_CASE("CSV writers emit one row per record") {
    const GeneBounds bounds = default_bounds(1);
    EvolveConfig cfg;
    cfg.generations = 3;
    const std::vector<double> target{1e-7, 1e4, 1e5, 1e3};
    const EvolutionRun r = run(cfg, bounds, hidden_point_evaluator(bounds, target));

    std::ostringstream log;
    write_run_log_csv(log, r);
    std::istringstream in(log.str());
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "generation,individual,gene_0,gene_1,gene_2,gene_3,"
          "fitness,dose_np1,dose_np2,cc_frac,csc_frac,penalized");
    int lines = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++lines;
    CHECK(lines == static_cast<int>(r.audit.size()));

    std::ostringstream sum;
    write_summary_csv(sum, r);
    std::istringstream sin(sum.str());
    std::getline(sin, header);
    CHECK(header == "generation,best,mean,min");
    lines = 0;
    while (std::getline(sin, line))
        if (!line.empty()) ++lines;
    CHECK(lines == static_cast<int>(r.history.size()));
}
