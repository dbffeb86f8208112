#pragma once

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "lamella/corner.hpp"
#include "lamella/fd.hpp"
#include "lamella/invert.hpp"
#include "lamella/io.hpp"
#include "lamella/modal.hpp"
#include "lamella/sector.hpp"

namespace lamella::cli {

namespace fs = std::filesystem;

inline std::string environment_note() {
    std::ostringstream os;
    os << "compiler " << __VERSION__ << ", eigen " << EIGEN_WORLD_VERSION << '.'
       << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
    return os.str();
}

class Stopwatch {
public:
    void start(const std::string& name) {
        name_ = name;
        t0_ = std::chrono::steady_clock::now();
    }
    void stop(nlohmann::json& timings) {
        const double s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
        timings[name_] = s;
    }

private:
    std::string name_;
    std::chrono::steady_clock::time_point t0_;
};

struct OutDir {
    fs::path dir;
    explicit OutDir(const std::string& path) : dir(path) { fs::create_directories(dir); }
    std::string file(const std::string& name) const { return (dir / name).string(); }
};

inline nlohmann::json complex_json(complexd z) {
    return nlohmann::json{{"re", z.real()}, {"im", z.imag()}};
}

inline nlohmann::json wellposed_json(const MediumPair& media) {
    auto wp = check_well_posedness(media);
    return nlohmann::json{{"condition_i", wp.condition_i},
                          {"condition_ii", wp.condition_ii},
                          {"te_case", wp.te_case},
                          {"proven", wp.proven()},
                          {"note", wp.note}};
}

// ---------------------------------------------------------------------------

inline int run_forward(const std::string& scenario_path, const std::string& profile_path,
                       const std::string& out_path) {
    OutDir out(out_path);
    RunRecord rec;
    rec.subcommand = "forward";
    rec.note = environment_note();
    rec.add_input("scenario", scenario_path, read_file(scenario_path));
    rec.add_input("profile", profile_path, read_file(profile_path));

    Scenario sc = load_scenario(scenario_path);
    RectangularProfile profile = load_profile(profile_path);
    const double b = sc.b > 0.0 ? sc.b : profile.lambda_plus() + 0.5;

    Stopwatch watch;
    watch.start("solve");
    auto sol = solve_forward(profile, sc.media, sc.inc, sc.N);
    watch.stop(rec.timings);

    watch.start("outputs");
    auto spec = sol.spectrum();
    write_spectrum_csv(out.file("spectrum.csv"), spec);
    auto tr = sol.trace(b, sc.nsamples);
    write_trace_csv(out.file("trace.csv"), tr);

    nlohmann::json summary{{"N", sc.N},
                           {"b", b},
                           {"nsamples", sc.nsamples},
                           {"max_block_norm", sol.max_block_norm},
                           {"min_rcond", sol.min_rcond},
                           {"well_posedness", wellposed_json(sc.media)}};
    if (sc.media.lossless()) {
        auto table = efficiencies(spec, sc.inc, sc.media);
        write_efficiency_csv(out.file("efficiencies.csv"), table);
        summary["energy_defect"] = table.defect;
        summary["reflected_sum"] = table.reflected_sum;
        summary["transmitted_sum"] = table.transmitted_sum;
        rec.outputs.push_back(out.file("efficiencies.csv"));
    }
    std::vector<double> conds;
    for (const auto& m : sol.layers) conds.push_back(m.cond_w);
    summary["layer_mode_condition"] = conds;
    summary["timings"] = "see run.json"; // keeps summary.json reproducible
    write_file(out.file("summary.json"), summary.dump(2) + "\n");
    watch.stop(rec.timings);

    rec.outputs.insert(rec.outputs.end(),
                       {out.file("spectrum.csv"), out.file("trace.csv"), out.file("summary.json")});
    write_run_record(out.file("run.json"), rec);
    return 0;
}

inline int run_oracle(const std::string& scenario_path, const std::string& profile_path,
                      const std::string& out_path, bool strict) {
    OutDir out(out_path);
    RunRecord rec;
    rec.subcommand = "oracle";
    rec.note = environment_note();
    rec.add_input("scenario", scenario_path, read_file(scenario_path));
    rec.add_input("profile", profile_path, read_file(profile_path));

    Scenario sc = load_scenario(scenario_path);
    RectangularProfile profile = load_profile(profile_path);
    FdGrid grid;
    grid.nx = sc.nx > 0 ? sc.nx : 128;
    grid.ny = sc.ny > 0 ? sc.ny : 128;
    grid.H = sc.H;
    grid.strict = strict;

    Stopwatch watch;
    watch.start("solve");
    auto sol = fd_solve(profile, sc.media, sc.inc, grid);
    watch.stop(rec.timings);

    watch.start("outputs");
    write_trace_csv(out.file("trace.csv"), sol.trace());
    const int nrep = std::min(sc.N, sol.grid.dtn_modes);
    write_spectrum_csv(out.file("spectrum.csv"), sol.spectrum(nrep));
    auto rel = rellich_check(sol, 0.0);
    nlohmann::json summary{{"nx", sol.grid.nx},
                           {"ny", sol.grid.ny},
                           {"H", sol.grid.H},
                           {"dtn_modes", sol.grid.dtn_modes},
                           {"snap_distance", sol.snap_distance},
                           {"trace_line", sol.grid.H},
                           {"rellich_I_plus", rel.I_plus},
                           {"rellich_I_minus", rel.I_minus},
                           {"well_posedness", wellposed_json(sc.media)}};
    write_file(out.file("summary.json"), summary.dump(2) + "\n");
    watch.stop(rec.timings);

    rec.outputs = {out.file("trace.csv"), out.file("spectrum.csv"), out.file("summary.json")};
    write_run_record(out.file("run.json"), rec);
    return 0;
}

inline int run_invert(const std::string& data_path, const std::string& spec_path,
                      const std::string& out_path) {
    OutDir out(out_path);
    RunRecord rec;
    rec.subcommand = "invert";
    rec.note = environment_note();
    rec.add_input("data", data_path, read_file(data_path));
    rec.add_input("spec", spec_path, read_file(spec_path));

    auto toml = load_toml(spec_path);
    InverseProblemSpec spec;
    spec.data = read_trace_csv(data_path);
    spec.k1 = toml.number("k1");
    spec.theta = toml.number("theta");
    spec.lambda = toml.number_or("lambda", 1.0);
    spec.b = toml.number("b");
    spec.data.b = spec.b;
    spec.M = static_cast<int>(toml.integer_or("search.M", 2));
    auto hb = toml.numbers("search.h");
    auto kb = toml.numbers("search.k2");
    if (hb.size() != 2 || kb.size() != 2) throw Error("search.h and search.k2 need two entries");
    spec.h_min = hb[0];
    spec.h_max = hb[1];
    spec.k2_min = kb[0];
    spec.k2_max = kb[1];
    spec.noise_level = toml.number_or("search.noise", 0.0);

    InversionConfig cfg;
    cfg.restarts = static_cast<int>(toml.integer_or("optimizer.restarts", 20));
    auto sched = toml.numbers_or("optimizer.n_schedule", {12, 24});
    cfg.n_schedule.clear();
    for (double v : sched) cfg.n_schedule.push_back(static_cast<int>(v));
    cfg.n_polish = static_cast<int>(toml.integer_or("optimizer.n_polish", 40));
    cfg.stage_iters = static_cast<int>(toml.integer_or("optimizer.stage_iters", 300));
    cfg.polish_iters = static_cast<int>(toml.integer_or("optimizer.polish_iters", 800));
    cfg.seed = static_cast<std::uint64_t>(toml.integer_or("optimizer.seed", 20200622));
    cfg.threads = static_cast<int>(toml.integer_or("optimizer.threads", 0));
    if (cfg.threads == 0) {
        if (const char* env = std::getenv("LAMELLA_THREADS")) cfg.threads = std::atoi(env);
    }

    Stopwatch watch;
    watch.start("reconstruct");
    auto res = reconstruct(spec, cfg);
    watch.stop(rec.timings);

    watch.start("outputs");
    save_profile(out.file("recovered_profile.json"), res.profile);

    nlohmann::json restarts = nlohmann::json::array();
    for (const auto& r : res.restarts) {
        restarts.push_back({{"index", r.index},
                            {"misfit", r.misfit},
                            {"evaluations", r.evaluations},
                            {"diagnostic", r.diagnostic}});
    }
    nlohmann::json rj{{"misfit", res.misfit},
                      {"k2", res.k2},
                      {"best_restart", res.best_restart},
                      {"ambiguous", res.ambiguous},
                      {"ambiguity_note", res.ambiguity_note},
                      {"restarts", restarts},
                      {"profile", profile_to_json(res.profile)}};
    write_file(out.file("result.json"), rj.dump(2) + "\n");

    std::ostringstream hist;
    hist << "iteration,best_misfit\n";
    for (std::size_t i = 0; i < res.misfit_history.size(); ++i)
        hist << i << ',' << fmt17(res.misfit_history[i]) << '\n';
    write_file(out.file("misfit_history.csv"), hist.str());

    std::ostringstream resid;
    resid << "index,re,im\n";
    for (std::size_t i = 0; i < res.residual.size(); ++i)
        resid << i << ',' << fmt17(res.residual[i].real()) << ','
              << fmt17(res.residual[i].imag()) << '\n';
    write_file(out.file("residual.csv"), resid.str());
    watch.stop(rec.timings);

    rec.outputs = {out.file("result.json"), out.file("recovered_profile.json"),
                   out.file("misfit_history.csv"), out.file("residual.csv")};
    write_run_record(out.file("run.json"), rec);
    return 0;
}

inline int run_probe(const std::string& scenario_path, const std::string& profile_a,
                     const std::string& profile_b, double k2_b, const std::string& out_path) {
    OutDir out(out_path);
    RunRecord rec;
    rec.subcommand = "probe";
    rec.note = environment_note();
    rec.add_input("scenario", scenario_path, read_file(scenario_path));
    rec.add_input("profile_a", profile_a, read_file(profile_a));
    rec.add_input("profile_b", profile_b, read_file(profile_b));

    Scenario sc = load_scenario(scenario_path);
    auto pa = load_profile(profile_a);
    auto pb = load_profile(profile_b);
    const double k2a = sc.media.k2.real();
    const double k2b = k2_b > 0.0 ? k2_b : k2a;
    const double b = sc.b > 0.0
                         ? sc.b
                         : std::max(pa.lambda_plus(), pb.lambda_plus()) + 0.5;

    Stopwatch watch;
    watch.start("probe");
    const double dist = identifiability_probe(pa, k2a, pb, k2b, sc.media.k1, sc.inc.theta,
                                              sc.media.lambda, b, sc.N, sc.nsamples);
    watch.stop(rec.timings);

    nlohmann::json pj{{"distance", dist}, {"k2_a", k2a}, {"k2_b", k2b},
                      {"b", b},           {"N", sc.N},   {"nsamples", sc.nsamples}};
    write_file(out.file("probe.json"), pj.dump(2) + "\n");
    rec.outputs = {out.file("probe.json")};
    write_run_record(out.file("run.json"), rec);
    return 0;
}

inline int run_corner_fit(const std::string& scenario_path, const std::string& profile_path,
                          const std::string& run_path, int corner_index, int n_max,
                          const std::string& out_path) {
    OutDir out(out_path);
    RunRecord rec;
    rec.subcommand = "corner-fit";
    rec.note = environment_note();

    std::string scenario_text, profile_text;
    if (!run_path.empty()) {
        // Reuse the inputs echoed in a stored forward run; the solve is
        // deterministic, so this reproduces the stored solution.
        auto stored = nlohmann::json::parse(read_file(run_path + "/run.json"));
        scenario_text = stored["inputs"]["scenario"]["content"].get<std::string>();
        profile_text = stored["inputs"]["profile"]["content"].get<std::string>();
        rec.add_input("scenario", run_path + "/run.json", scenario_text);
        rec.add_input("profile", run_path + "/run.json", profile_text);
    } else {
        scenario_text = read_file(scenario_path);
        profile_text = read_file(profile_path);
        rec.add_input("scenario", scenario_path, scenario_text);
        rec.add_input("profile", profile_path, profile_text);
    }

    Scenario sc = scenario_from_toml(parse_toml(scenario_text));
    auto profile = profile_from_json(nlohmann::json::parse(profile_text));
    auto corners = corners_of(profile);
    if (corner_index < 0 || corner_index >= static_cast<int>(corners.size()))
        throw Error("corner index out of range (profile has " +
                    std::to_string(corners.size()) + " corners)");

    Stopwatch watch;
    watch.start("solve");
    auto sol = solve_forward(profile, sc.media, sc.inc, sc.N);
    watch.stop(rec.timings);

    watch.start("fit");
    const double clearance = corner_clearance(profile, corner_index);
    auto radii = default_fit_radii(clearance);
    auto fit = fit_harmonic_expansion(
        [&](double x, double y) { return sol.evaluate(x, y); }, corners[corner_index], radii,
        n_max);
    watch.stop(rec.timings);

    nlohmann::json coeffs = nlohmann::json::array();
    for (std::size_t n = 0; n < fit.a.size(); ++n)
        coeffs.push_back({{"n", n}, {"a", complex_json(fit.a[n])}, {"b", complex_json(fit.b[n])}});
    nlohmann::json fj{{"corner",
                       {{"x1", corners[corner_index].x1},
                        {"x2", corners[corner_index].x2},
                        {"interior_angle", corners[corner_index].interior_angle}}},
                      {"clearance", clearance},
                      {"radii", fit.radii},
                      {"coefficients", coeffs},
                      {"residuals", fit.residuals},
                      {"residual_exponent", fit.residual_exponent},
                      {"lowest_order", fit.lowest_order},
                      {"condition", fit.condition}};
    write_file(out.file("corner_fit.json"), fj.dump(2) + "\n");
    rec.outputs = {out.file("corner_fit.json")};
    write_run_record(out.file("run.json"), rec);
    return 0;
}

inline int run_lemma_check(int nmax, int samples, std::uint64_t seed,
                           const std::string& out_path) {
    OutDir out(out_path);
    RunRecord rec;
    rec.subcommand = "lemma-check";
    rec.note = environment_note();
    rec.inputs["nmax"] = nmax;
    rec.inputs["samples"] = samples;
    rec.inputs["seed"] = seed;

    Stopwatch watch;
    watch.start("battery");

    bool all_pass = true;
    nlohmann::json report;

    // Banded determinant system: exact values and certificates.
    {
        bool b0_ok = dmatrix_entry_B(2, 0) == 8;
        auto d3 = dmatrix_determinant(3);
        bool det3_ok = d3.determinant == 576;
        bool range_ok = true;
        for (long long n = 2; n <= nmax; ++n) {
            auto rep = dmatrix_determinant(n);
            range_ok = range_ok && rep.nonzero && rep.product_identity_exact &&
                       rep.pivot_route_matches;
        }
        report["determinants"] = {{"B0_of_2_is_8", b0_ok},
                                  {"detD2_is_576", det3_ok},
                                  {"nonzero_and_certified_up_to", nmax},
                                  {"all_nonzero", range_ok}};
        all_pass = all_pass && b0_ok && det3_ok && range_ok;
    }

    // Sector special solutions: random battery plus the zero-data case.
    {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(0.0, 1.0);
        std::uniform_int_distribution<int> uk(0, 6);
        double worst = 0.0;
        bool zero_c_ok = true;
        for (int trial = 0; trial < samples; ++trial) {
            const int k = uk(rng);
            TrigPoly p = TrigPoly::zero(k);
            for (int j = k % 2; j <= k; j += 2) {
                p.cos_c[j] = complexd(g(rng), g(rng));
                p.sin_c[j] = complexd(g(rng), g(rng));
            }
            const SectorBc bc = trial % 2 == 0 ? SectorBc::dirichlet : SectorBc::neumann;
            const bool zero_data = trial % 10 == 9;
            const complexd cp = zero_data ? complexd(0, 0) : complexd(g(rng), g(rng));
            const complexd cm = zero_data ? complexd(0, 0) : complexd(g(rng), g(rng));
            auto s = build_special_solution(k, cp, cm, p, bc);
            worst = std::max(worst, s.verify().max());
            if (zero_data && s.C != complexd(0, 0)) zero_c_ok = false;
        }
        const bool residual_ok = worst < 1e-12;
        report["special_solutions"] = {{"samples", samples},
                                       {"max_residual", worst},
                                       {"residuals_below_1e-12", residual_ok},
                                       {"C_vanishes_for_zero_data", zero_c_ok}};
        all_pass = all_pass && residual_ok && zero_c_ok;
    }

    // Sector polynomials: equality across the interface for harmonic data.
    {
        std::mt19937_64 rng(seed ^ 0xabcdefull);
        std::uniform_int_distribution<int> coeff(-9, 9);
        bool equal_ok = true;
        const long long n_hi = std::min<long long>(10, nmax);
        for (long long n = 0; n <= n_hi; ++n) {
            HomogeneousPoly H = HomogeneousPoly::zero(n);
            auto re = harmonic_re(n);
            auto im = harmonic_im(n);
            const int c1 = coeff(rng), c2 = coeff(rng);
            for (long long j = 0; j <= n; ++j)
                H.coef[j] = bigrat(c1) * re.coef[j] + bigrat(c2) * im.coef[j];
            auto res = polynomial_sector_solve(H);
            equal_ok = equal_ok && res.equal && res.laplacian_matches && res.certificate.nonzero;
        }
        report["sector_polynomials"] = {{"max_degree", n_hi}, {"all_equal", equal_ok}};
        all_pass = all_pass && equal_ok;
    }

    watch.stop(rec.timings);
    report["all_pass"] = all_pass;
    write_file(out.file("lemma_report.json"), report.dump(2) + "\n");
    rec.outputs = {out.file("lemma_report.json")};
    write_run_record(out.file("run.json"), rec);
    return all_pass ? 0 : 1;
}

inline int run_converge(const std::string& scenario_path, const std::string& profile_path,
                        const std::vector<int>& n_list, const std::string& out_path) {
    OutDir out(out_path);
    RunRecord rec;
    rec.subcommand = "converge";
    rec.note = environment_note();
    rec.add_input("scenario", scenario_path, read_file(scenario_path));
    rec.add_input("profile", profile_path, read_file(profile_path));

    Scenario sc = load_scenario(scenario_path);
    auto profile = load_profile(profile_path);
    const double b = sc.b > 0.0 ? sc.b : profile.lambda_plus() + 0.5;
    std::vector<int> ns = n_list;
    if (ns.empty()) ns = {8, 16, 24, 32, 40};

    Stopwatch watch;
    watch.start("study");
    const int n_ref = *std::max_element(ns.begin(), ns.end());
    auto ref = solve_forward(profile, sc.media, sc.inc, n_ref);
    auto ref_trace = ref.trace(b, sc.nsamples);
    auto ref_spec = ref.spectrum();

    std::ostringstream csv;
    csv << "N,energy_defect,a0_err_vs_finest,trace_rel_err_vs_finest\n";
    std::vector<double> defects;
    for (int N : ns) {
        auto sol = solve_forward(profile, sc.media, sc.inc, N);
        auto spec = sol.spectrum();
        double defect = std::numeric_limits<double>::quiet_NaN();
        if (sc.media.lossless()) defect = efficiencies(spec, sc.inc, sc.media).defect;
        defects.push_back(defect);
        const double a0_err =
            std::abs(spec.A_plus[spec.index(0)] - ref_spec.A_plus[ref_spec.index(0)]);
        auto tr = sol.trace(b, sc.nsamples);
        double num = 0, den = 0;
        for (int i = 0; i < sc.nsamples; ++i) {
            num += std::norm(tr.u[i] - ref_trace.u[i]);
            den += std::norm(ref_trace.u[i]);
        }
        csv << N << ',' << fmt17(defect) << ',' << fmt17(a0_err) << ','
            << fmt17(std::sqrt(num / den)) << '\n';
    }
    watch.stop(rec.timings);
    write_file(out.file("converge.csv"), csv.str());

    // Defect monotonicity up to a roundoff floor.
    bool monotone = true;
    for (std::size_t i = 0; i + 1 < defects.size(); ++i)
        for (std::size_t j = i + 1; j < defects.size(); ++j)
            if (defects[j] > defects[i] + 1e-10) monotone = false;
    nlohmann::json summary{{"N_values", ns},
                           {"defects", defects},
                           {"defect_monotone_up_to_1e-10", monotone},
                           {"reference_N", n_ref}};
    write_file(out.file("summary.json"), summary.dump(2) + "\n");
    rec.outputs = {out.file("converge.csv"), out.file("summary.json")};
    write_run_record(out.file("run.json"), rec);
    return 0;
}

// ---------------------------------------------------------------------------

inline int dispatch(std::vector<std::string> args) {
    CLI::App app{"Forward and inverse solvers for binary penetrable gratings"};
    app.require_subcommand(1);

    std::string scenario, profile, profile_b, data, spec, out = "run";
    int corner_index = 0, n_max = 4, nmax = 20, samples = 100;
    std::uint64_t seed = 20200622;
    double k2_b = 0.0;
    bool strict = false;
    std::string n_list_str;

    auto* fwd = app.add_subcommand("forward", "modal forward solve");
    fwd->add_option("--scenario", scenario)->required();
    fwd->add_option("--profile", profile)->required();
    fwd->add_option("--out", out);

    auto* orc = app.add_subcommand("oracle", "finite-difference reference solve");
    orc->add_option("--scenario", scenario)->required();
    orc->add_option("--profile", profile)->required();
    orc->add_option("--out", out);
    orc->add_flag("--strict", strict, "refuse profiles that need grid snapping");

    auto* inv = app.add_subcommand("invert", "single-measurement reconstruction");
    inv->add_option("--data", data)->required();
    inv->add_option("--spec", spec)->required();
    inv->add_option("--out", out);

    auto* prb = app.add_subcommand("probe", "identifiability probe of two configurations");
    prb->add_option("--scenario", scenario)->required();
    prb->add_option("--profile-a", profile)->required();
    prb->add_option("--profile-b", profile_b)->required();
    prb->add_option("--k2-b", k2_b, "lower wavenumber of configuration B");
    prb->add_option("--out", out);

    std::string run_dir;
    auto* cfit = app.add_subcommand("corner-fit", "harmonic expansion at a profile corner");
    auto* cfit_sc = cfit->add_option("--scenario", scenario);
    cfit->add_option("--profile", profile)->needs(cfit_sc);
    cfit->add_option("--run", run_dir, "reuse the inputs of a stored forward run")
        ->excludes(cfit_sc);
    cfit->add_option("--corner", corner_index)->required();
    cfit->add_option("--nmax", n_max);
    cfit->add_option("--out", out);

    auto* lem = app.add_subcommand("lemma-check", "sector analysis verification battery");
    lem->add_option("--nmax", nmax);
    lem->add_option("--samples", samples);
    lem->add_option("--seed", seed);
    lem->add_option("--out", out);

    auto* cvg = app.add_subcommand("converge", "truncation study of the modal solver");
    cvg->add_option("--scenario", scenario)->required();
    cvg->add_option("--profile", profile)->required();
    cvg->add_option("--n-list", n_list_str, "comma separated truncation orders");
    cvg->add_option("--out", out);

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (fwd->parsed()) return run_forward(scenario, profile, out);
        if (orc->parsed()) return run_oracle(scenario, profile, out, strict);
        if (inv->parsed()) return run_invert(data, spec, out);
        if (prb->parsed()) return run_probe(scenario, profile, profile_b, k2_b, out);
        if (cfit->parsed()) {
            if (run_dir.empty() && (scenario.empty() || profile.empty())) {
                fprintf(stderr, "corner-fit needs --run or both --scenario and --profile\n");
                return 2;
            }
            return run_corner_fit(scenario, profile, run_dir, corner_index, n_max, out);
        }
        if (lem->parsed()) return run_lemma_check(nmax, samples, seed, out);
        if (cvg->parsed()) {
            std::vector<int> ns;
            std::istringstream items(n_list_str);
            std::string item;
            while (std::getline(items, item, ','))
                if (!item.empty()) ns.push_back(std::stoi(item));
            return run_converge(scenario, profile, ns, out);
        }
    } catch (const Error& e) {
        fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}

} // namespace lamella::cli
