#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include "ncopt/tissue.hpp"
#include "oracles.hpp"

using namespace ncopt;

namespace {

NanoparticleDesign make_design(double d, double ka, double np0, double e,
                               double kd = 1e-4, double ki = 1e-5) {
    NanoparticleDesign out;
    out.diffusion_cm2_s = d;
    out.binding_rate_per_molar_s = ka;
    out.dissoc_rate_per_s = kd;
    out.internal_rate_per_s = ki;
    out.extravasated_count = np0;
    out.payload_count = e;
    return out;
}

// Source vessel plus one cell; the standard calibration benchmark.
TissueSystem benchmark_system(double t_end = 1e4) {
    Scenario sc;
    sc.id = "benchmark";
    sc.compartments = {CompartmentKind::VP, CompartmentKind::CC};
    TissueSystem sys =
        build_system(sc, {make_design(1e-6, 7e5, 1e5, 1e3)}, DrugModel{}, HostModel{});
    sys.t_end_s = t_end;
    return sys;
}

oracles::MeanFieldParams mean_field_params(const TissueSystem& sys) {
    oracles::MeanFieldParams p;
    p.release = sys.release_rate[0];
    p.hop_rate = sys.hop_rate[0];
    p.bind_rate = sys.bind_rate[0];
    p.unbind_rate = sys.unbind_rate[0];
    p.internal_rate = sys.internal_rate[0];
    p.receptors0 = sys.receptors_per_cell;
    return p;
}

void check_exact_conservation(const TissueSystem& sys, const TissueState& st) {
    for (int s = 0; s < sys.n_species(); ++s) {
        std::int64_t total = 0;
        for (int c = 0; c < sys.n_compartments(); ++c)
            total += st.free_np[s][c] + st.complexes[s][c] + st.internalized[s][c];
        CHECK(total == st.injected_total[s]);
    }
    const std::int64_t n_r =
        static_cast<std::int64_t>(std::llround(sys.receptors_per_cell));
    for (int c = 0; c < sys.n_compartments(); ++c) {
        if (!sys.is_cell(c)) {
            CHECK(st.receptors[c] == 0);
            continue;
        }
        std::int64_t bound = 0;
        for (int s = 0; s < sys.n_species(); ++s) bound += st.complexes[s][c];
        if (st.alive[c]) CHECK(st.receptors[c] + bound == n_r);
        else CHECK(st.receptors[c] == 0);
    }
}

} // namespace

TEST_CASE("build_system assembles rates and receptor pools") {
    const TissueSystem sys = build_system(scenario::worst_case_homogeneous(),
                                          {make_design(1e-6, 7e5, 60000, 5000)},
                                          DrugModel{}, HostModel{});
    CHECK(sys.n_compartments() == 23);
    CHECK(sys.n_species() == 1);
    // D/L^2 with L = 10 um
    CHECK(sys.hop_rate[0] == doctest::Approx(1.0));
    // k_a/(N_A * V_c) with V_c = 1e-12 L
    CHECK(sys.bind_rate[0] == doctest::Approx(7e5 / (6.02214076e23 * 1e-12)));
    // NP0 over the 48 h circulation window
    CHECK(sys.release_rate[0] == doctest::Approx(60000.0 / 172800.0));
    CHECK(sys.unbind_rate[0] == doctest::Approx(1e-4));
    CHECK(sys.internal_rate[0] == doctest::Approx(1e-5));
    CHECK(sys.lethal_thresholds[0] == 1204);
    CHECK(sys.t_end_s == doctest::Approx(172800.0));
    int cells = 0;
    for (int c = 0; c < sys.n_compartments(); ++c)
        if (sys.is_cell(c)) ++cells;
    CHECK(cells == 22);
}

TEST_CASE("build_system rejects invalid inputs") {
    const Scenario sc = scenario::worst_case_homogeneous();
    CHECK_THROWS(build_system(sc, {}, DrugModel{}, HostModel{}));
    const NanoparticleDesign d = make_design(1e-6, 7e5, 60000, 5000);
    CHECK_THROWS(build_system(sc, {d, d, d}, DrugModel{}, HostModel{}));
    CHECK_THROWS(build_system(sc, {make_design(0.0, 7e5, 60000, 5000)},
                              DrugModel{}, HostModel{}));
    CHECK_THROWS(build_system(sc, {make_design(1e-6, -1.0, 60000, 5000)},
                              DrugModel{}, HostModel{}));
    Scenario tiny;
    tiny.compartments = {CompartmentKind::VP};
    CHECK_THROWS(build_system(tiny, {d}, DrugModel{}, HostModel{}));
}

TEST_CASE("zero release gives the all-zero trivial outcome on both backends") {
    TissueSystem sys = benchmark_system();
    sys.release_rate[0] = 0.0;
    auto [st1, out1] = simulate_ssa(sys, 7);
    auto [st2, out2] = simulate_tau(sys, 7);
    for (const TissueState* st : {&st1, &st2}) {
        CHECK(st->injected_total[0] == 0);
        CHECK(st->internalized[0][1] == 0);
        CHECK(st->complexes[0][1] == 0);
        CHECK(st->alive[1] == 1);
        CHECK(st->clock_s == doctest::Approx(sys.t_end_s));
    }
    CHECK(out1.cc_killed == 0);
    CHECK(out2.cc_killed == 0);
}

TEST_CASE("zero binding rate never forms complexes or kills") {
    Scenario sc = scenario::worst_case_homogeneous();
    TissueSystem sys =
        build_system(sc, {make_design(1e-6, 0.0, 60000, 5000)}, DrugModel{}, HostModel{});
    sys.t_end_s = 2e4;
    auto [st, out] = simulate_ssa(sys, 3);
    CHECK(st.injected_total[0] > 0);
    for (int c = 0; c < sys.n_compartments(); ++c) {
        CHECK(st.complexes[0][c] == 0);
        CHECK(st.internalized[0][c] == 0);
    }
    CHECK(out.cc_killed == 0);
    check_exact_conservation(sys, st);
}

TEST_CASE("SSA mean matches the mean-field ODE oracle on the benchmark") {
    const TissueSystem sys = benchmark_system();
    const auto ode = oracles::mean_field_rk4(mean_field_params(sys), sys.t_end_s);
    double mean = 0.0;
    const int n = 20;
    for (std::uint64_t s = 1; s <= n; ++s) {
        auto [st, out] = simulate_ssa(sys, s);
        mean += static_cast<double>(st.internalized[0][1]);
    }
    mean /= n;
    CHECK(std::abs(mean - ode[4]) / ode[4] < 0.05);
}

TEST_CASE("tau backend matches the mean-field ODE oracle on the benchmark") {
    const TissueSystem sys = benchmark_system();
    const auto ode = oracles::mean_field_rk4(mean_field_params(sys), sys.t_end_s);
    double mean = 0.0;
    const int n = 20;
    for (std::uint64_t s = 1; s <= n; ++s) {
        auto [st, out] = simulate_tau(sys, 100 + s, 0.03);
        mean += static_cast<double>(st.internalized[0][1]);
    }
    mean /= n;
    CHECK(std::abs(mean - ode[4]) / ode[4] < 0.05);
}

TEST_CASE("SSA and tau final internalized counts pass a KS test") {
    const TissueSystem sys = benchmark_system();
    std::vector<double> a, b;
    for (std::uint64_t s = 1; s <= 40; ++s) {
        auto [st1, o1] = simulate_ssa(sys, s);
        a.push_back(static_cast<double>(st1.internalized[0][1]));
        auto [st2, o2] = simulate_tau(sys, 500 + s, 0.03);
        b.push_back(static_cast<double>(st2.internalized[0][1]));
    }
    CHECK(oracles::ks_two_sample_pvalue(a, b) > 0.01);
}

TEST_CASE("conservation holds exactly in randomized systems on both backends") {
    Rng rng(42);
    auto logu = [&](double lo, double hi) {
        return lo * std::exp(uniform01(rng) * std::log(hi / lo));
    };
    for (int trial = 0; trial < 20; ++trial) {
        Scenario sc;
        sc.id = "random";
        sc.compartments.push_back(CompartmentKind::VP);
        const int len = 4 + static_cast<int>(uniform01(rng) * 8);
        for (int i = 0; i < len; ++i) {
            const double u = uniform01(rng);
            sc.compartments.push_back(u < 0.5   ? CompartmentKind::CC
                                      : u < 0.7 ? CompartmentKind::CSC
                                      : u < 0.9 ? CompartmentKind::ECM
                                                : CompartmentKind::VP);
        }
        const int ns = uniform01(rng) < 0.5 ? 1 : 2;
        std::vector<NanoparticleDesign> designs;
        for (int s = 0; s < ns; ++s)
            designs.push_back(make_design(logu(1e-8, 1e-6), logu(1e3, 1e6),
                                          uniform01(rng) * 1e5, logu(1e2, 1e4),
                                          logu(1e-5, 1e-2), logu(1e-6, 1e-3)));
        TissueSystem sys = build_system(sc, designs, DrugModel{}, HostModel{});
        sys.t_end_s = 5e3;
        auto [st1, o1] = simulate_ssa(sys, 1000 + trial);
        check_exact_conservation(sys, st1);
        auto [st2, o2] = simulate_tau(sys, 2000 + trial, 0.03);
        check_exact_conservation(sys, st2);
    }
}

TEST_CASE("trajectory rows keep the running invariants") {
    Scenario sc = scenario::worst_case_homogeneous();
    TissueSystem sys =
        build_system(sc, {make_design(1e-6, 7e5, 60000, 10000)}, DrugModel{}, HostModel{});
    sys.t_end_s = 6e4; // threshold 602: deaths well inside the window
    std::vector<TrajectorySample> rows;
    auto [st, out] = simulate_ssa(sys, 11, &rows, {600.0});
    REQUIRE(!rows.empty());
    CHECK(rows.size() % static_cast<std::size_t>(sys.n_compartments()) == 0);

    const std::int64_t n_r =
        static_cast<std::int64_t>(std::llround(sys.receptors_per_cell));
    std::map<int, std::int64_t> last_npi;
    std::map<int, bool> seen_dead;
    double last_t = -1.0;
    for (const TrajectorySample& r : rows) {
        if (r.compartment == 0) CHECK(r.t_s >= last_t);
        last_t = std::max(last_t, r.t_s);
        CHECK(r.free_np >= 0);
        CHECK(r.complexes >= 0);
        if (sys.is_cell(r.compartment)) {
            if (r.alive) CHECK(r.receptors + r.complexes == n_r);
            else CHECK(r.receptors == 0);
        }
        // NP_I never decreases; dead never resurrects
        auto it = last_npi.find(r.compartment);
        if (it != last_npi.end()) CHECK(r.internalized >= it->second);
        last_npi[r.compartment] = r.internalized;
        if (seen_dead[r.compartment]) CHECK_FALSE(r.alive);
        if (sys.is_cell(r.compartment) && !r.alive) seen_dead[r.compartment] = true;
    }
    CHECK(out.cc_killed > 0); // the run actually exercises the death path
}

TEST_CASE("death bookkeeping: threshold reached, receptors gone, complexes frozen") {
    Scenario sc = scenario::worst_case_homogeneous();
    TissueSystem sys =
        build_system(sc, {make_design(1e-6, 7e5, 60000, 10000)}, DrugModel{}, HostModel{});
    CHECK(sys.lethal_thresholds[0] == 602);
    std::vector<TrajectorySample> rows;
    auto [st, out] = simulate_ssa(sys, 5, &rows, {1200.0});
    REQUIRE(out.cc_killed > 0);
    std::map<int, std::int64_t> frozen;
    for (const TrajectorySample& r : rows) {
        if (!sys.is_cell(r.compartment) || r.alive) continue;
        auto it = frozen.find(r.compartment);
        if (it == frozen.end()) frozen[r.compartment] = r.complexes;
        else CHECK(r.complexes == it->second); // sequestered for good
    }
    for (int c = 0; c < sys.n_compartments(); ++c) {
        if (!sys.is_cell(c) || st.alive[c]) continue;
        CHECK(st.receptors[c] == 0);
        CHECK(st.death_time_s[c] >= 0.0);
        CHECK(st.death_time_s[c] <= sys.t_end_s);
        CHECK(st.internalized[0][c] >= sys.lethal_thresholds[0]);
    }
}

TEST_CASE("identical seeds reproduce identical trajectories") {
    const TissueSystem sys = benchmark_system();
    auto run = [&](std::uint64_t seed, bool tau) {
        std::vector<TrajectorySample> rows;
        if (tau) simulate_tau(sys, seed, 0.03, &rows, {600.0});
        else simulate_ssa(sys, seed, &rows, {600.0});
        std::ostringstream ss;
        write_trajectory_csv(ss, rows);
        return ss.str();
    };
    CHECK(run(9, false) == run(9, false));
    CHECK(run(9, true) == run(9, true));
    CHECK(run(9, false) != run(10, false));
}

TEST_CASE("outcome metrics use the 0/0 -> 1 convention") {
    Scenario sc;
    sc.compartments = {CompartmentKind::VP, CompartmentKind::ECM, CompartmentKind::ECM};
    TissueSystem sys =
        build_system(sc, {make_design(1e-6, 7e5, 1e4, 1e3)}, DrugModel{}, HostModel{});
    sys.t_end_s = 1e3;
    auto [st, out] = simulate_ssa(sys, 1);
    CHECK(out.cc_total == 0);
    CHECK(out.csc_total == 0);
    CHECK(out.cc_fraction() == doctest::Approx(1.0));
    CHECK(out.csc_fraction() == doctest::Approx(1.0));
    check_exact_conservation(sys, st); // transport-only chain still conserves
}

TEST_CASE("single-species treatment never kills stem cells") {
    const TissueSystem sys =
        build_system(scenario::worst_case_heterogeneous(),
                     {make_design(9.8e-7, 2.17e5, 923000, 400)}, DrugModel{}, HostModel{});
    for (std::uint64_t s = 1; s <= 5; ++s) {
        auto [st, out] = simulate_tau(sys, s, 0.03);
        CHECK(out.csc_killed == 0);
        CHECK(out.csc_total == 2);
    }
}

TEST_CASE("kill count responds monotonically to dose") {
    auto mean_kills = [&](double np0) {
        const TissueSystem sys =
            build_system(scenario::worst_case_homogeneous(),
                         {make_design(1e-6, 7e5, np0, 5000)}, DrugModel{}, HostModel{});
        double m = 0.0;
        for (std::uint64_t s = 1; s <= 20; ++s) {
            auto [st, out] = simulate_tau(sys, s, 0.03);
            m += static_cast<double>(out.cc_killed);
        }
        return m / 20.0;
    };
    const double lo = mean_kills(30000), hi = mean_kills(60000);
    CHECK(hi + 1.0 >= lo); // doubling the dose never loses more than noise
    CHECK(hi > lo);        // and here it clearly gains
}

TEST_CASE("tau kill distribution stays within two cells of the SSA mean") {
    const TissueSystem sys =
        build_system(scenario::worst_case_homogeneous(),
                     {make_design(1e-6, 7e5, 60000, 5000)}, DrugModel{}, HostModel{});
    double ssa = 0.0, tau = 0.0;
    for (std::uint64_t s = 1; s <= 5; ++s) {
        auto [st, out] = simulate_ssa(sys, s);
        ssa += static_cast<double>(out.cc_killed);
    }
    for (std::uint64_t s = 1; s <= 20; ++s) {
        auto [st, out] = simulate_tau(sys, s, 0.03);
        tau += static_cast<double>(out.cc_killed);
    }
    CHECK(std::abs(tau / 20.0 - ssa / 5.0) <= 2.0);
}

TEST_CASE("tau epsilon outside (0, 0.1] is rejected") {
    const TissueSystem sys = benchmark_system();
    CHECK_THROWS(simulate_tau(sys, 1, 0.0));
    CHECK_THROWS(simulate_tau(sys, 1, -0.01));
    CHECK_THROWS(simulate_tau(sys, 1, 0.11));
}

TEST_CASE("trajectory CSV format") {
    const TissueSystem sys = benchmark_system(3000.0);
    std::vector<TrajectorySample> rows;
    simulate_ssa(sys, 2, &rows, {600.0});
    std::ostringstream ss;
    write_trajectory_csv(ss, rows);
    std::istringstream in(ss.str());
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,compartment,species,np_f,r,c,np_i,alive");
    int lines = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++lines;
    CHECK(lines == static_cast<int>(rows.size()));
    // t = 0 and every 600 s mark up to t_end, two compartments each
    CHECK(lines == 2 * 6);
}
