// covflow command line: config-driven runs of the individual modules and the
// full pipeline. Exit 0 on pass, 2 on a failed check, 1 on bad input.

#include "covflow/covflow.hpp"
#include "covflow/report_json.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <random>

namespace fs = std::filesystem;
using namespace covflow;

namespace {

struct Common {
    std::string config;
    std::string out;
    std::string format;
    std::uint64_t seed = 0;
    bool seeded = false;
    bool quiet = false;
};

struct Outcome {
    PipelineReport report;  // reused as the generic report shape
    bool pass = true;
};

void log(const Common& c, const std::string& s) {
    if (!c.quiet) std::cerr << "covflow: " << s << "\n";
}

ComplexField initial_datum(const ExperimentConfig& cfg) {
    return gaussian_field(cfg.grid, cfg.u0_width, {0.0, 0.0, 0.0}, {cfg.u0_kx, 0.0, 0.0});
}

FlowParams flow_params(const ExperimentConfig& cfg) {
    return FlowParams{cfg.a, cfg.b, cfg.dt, cfg.t_end, cfg.store_every};
}

double auto_radius(const ExperimentConfig& cfg, double rate) {
    return cfg.truncation_radius > 0.0 ? cfg.truncation_radius : detail::auto_truncation(rate);
}

Outcome run_evolve(const ExperimentConfig& cfg, const Common& c, const fs::path& dir) {
    Outcome o;
    const Potentials p = Potentials::from_spec(cfg.potential, cfg.grid, cfg.V1, cfg.V2, cfg.F);
    const Trajectory tr = evolve(initial_datum(cfg), p, flow_params(cfg));
    log(c, "evolved " + std::to_string(tr.times.size()) + " snapshots");

    fs::create_directories(dir / "snapshots");
    std::ostringstream index;
    index << "index,t,norm,boundary_mass,file\n";
    const double n0 = l2_norm(tr.snapshots.front());
    double drift = 0.0;
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "%05zu.bin", k);
        const cvec& v = tr.snapshots[k].values;
        std::ofstream f(dir / "snapshots" / name, std::ios::binary);
        f.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(cplx)));
        if (!f) throw std::runtime_error("cannot write snapshot " + std::string(name));
        const double n = l2_norm(tr.snapshots[k]);
        drift = std::max(drift, std::abs(n - n0) / n0);
        char line[160];
        std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,snapshots/%s\n", k, tr.times[k], n,
                      boundary_mass_fraction(cfg.grid, v), name);
        index << line;
    }
    if (wants_csv(cfg.output_formats)) write_text(dir / "index.csv", index.str());
    o.report.stages.push_back({"evolve", true, {{"snapshots", static_cast<double>(tr.times.size())}}});
    o.report.defects = {{"norm_drift", drift}, {"stability_bound", stability_bound(cfg.grid, cfg.a, cfg.b)}};
    return o;
}

Outcome run_gauge(const ExperimentConfig& cfg, const Common&, const fs::path&) {
    Outcome o;
    const GaugeTransform gt = cronstrom_potential(cfg.potential, cfg.grid, cfg.quadrature_nodes);
    StageRecord st{"gauge_reduction", gt.transversality_defect <= gauge_transversality_tol, {}};
    o.report.defects = {{"gauge_transversality", gt.transversality_defect},
                        {"gauge_dA_transversality", gt.dA_transversality_defect},
                        {"gauge_reduced_sup", sup_norm(gt.transformed_potential)}};
    if (cfg.potential.kind != PotentialKind::zero)
        o.report.defects.emplace_back("gauge_cross_identity",
                                      cross_identity_check(cfg.potential, cfg.grid, cfg.quadrature_nodes));
    if (cfg.potential.kind == PotentialKind::constant_field) {
        const RealVectorField A = eval_potential(cfg.potential, cfg.grid);
        double m = 0.0;
        for (int d = 0; d < cfg.grid.dim; ++d)
            for (std::size_t i = 0; i < cfg.grid.size(); ++i)
                m = std::max(m, std::abs(A.components[d][i] - gt.transformed_potential.components[d][i]));
        o.report.defects.emplace_back("gauge_fixed_point", m);
        st.pass = st.pass && m <= gauge_fixed_point_tol;
    }
    if (cfg.potential.kind == PotentialKind::pure_gauge)
        st.pass = st.pass && sup_norm(gt.transformed_potential) <= gauge_pure_tol;
    o.report.stages.push_back(st);
    return o;
}

// Appell transform of the configured flow on [0, t_end], rescaled to unit time.
Outcome run_appell(const ExperimentConfig& cfg, const Common& c, const fs::path&) {
    Outcome o;
    if (cfg.potential.kind != PotentialKind::zero && cfg.potential.kind != PotentialKind::constant_field)
        throw ConfigError("appell: the potential must already satisfy x.A = 0 (zero or constant_field)");
    const double T = cfg.t_end;
    const Potentials p = Potentials::from_spec(cfg.potential, cfg.grid, cfg.V1, cfg.V2, cfg.F);
    FlowParams fp = flow_params(cfg);
    fp.store_every = 1;
    Trajectory tr = evolve(initial_datum(cfg), p, fp);
    for (auto& t : tr.times) t /= T;
    const AppellParams P{cfg.alpha, cfg.beta, cfg.a * T, cfg.b * T};
    const GridSpec target{cfg.grid.dim, cfg.grid.half_width / P.coverage_scale(), cfg.grid.points};
    const SourceFields src = SourceFields::from_specs(cfg.potential, cfg.grid, cfg.V1, cfg.V2, cfg.F);
    log(c, "appell residual");
    const double res = appell_residual(tr, P, {0.25, 0.5, 0.75}, src, target, 1e-4);
    o.report.defects.emplace_back("appell_residual", res);
    StageRecord st{"appell", res <= cfg.appell_tol, {{"alpha", P.alpha}, {"beta", P.beta}}};
    for (const auto& id : appell_norm_identities(tr, P, cfg.gamma, 0.5, target, src, cfg.F))
        o.report.defects.emplace_back("identity_gap_" + id.name, id.relative_gap());
    o.report.stages.push_back(st);
    return o;
}

Outcome run_convexity(const ExperimentConfig& cfg, const Common& c, const fs::path& dir) {
    Outcome o;
    const Potentials p = Potentials::from_spec(cfg.potential, cfg.grid, cfg.V1, cfg.V2, cfg.F);
    const Trajectory tr = evolve(initial_datum(cfg), p, flow_params(cfg));
    WeightSpec w = WeightSpec::interpolating(cfg.alpha, cfg.beta, cfg.t_end);
    const double top = std::max(1.0 / (cfg.alpha * cfg.alpha), 1.0 / (cfg.beta * cfg.beta));
    w.truncation_radius = auto_radius(cfg, top);
    log(c, "weighted norms over " + std::to_string(tr.times.size()) + " samples");
    const ConvexityReport r = weighted_H(tr, w);
    const ConvexityVerdict v = convexity_check(r, cfg.convexity_tol);
    HypothesisReport hyp = hypothesis_report(cfg.potential, cfg.grid, cfg.carleman_v, cfg.V1, cfg.V2, cfg.alpha, cfg.beta);
    const GradientBound gb = gradient_bound_check(tr, w, p, hyp.M1, hyp.M_A);
    if (wants_csv(cfg.output_formats)) {
        fs::create_directories(dir);
        std::ostringstream m;
        write_monitors_csv(m, r, gb.grad_series);
        write_text(dir / "monitors.csv", m.str());
    }
    o.report.stages.push_back({"convexity", v.pass, {{"samples", static_cast<double>(r.times.size())}}});
    o.report.defects = {{"convexity_min_d2_theta", v.min_d2_theta},
                        {"convexity_min_d2_logH", v.min_d2_logH},
                        {"gradient_bound_ratio", gb.ratio()},
                        {"weight_truncation_radius", w.truncation_radius}};
    return o;
}

Outcome run_carleman(const ExperimentConfig& cfg, const Common& c, const fs::path& dir) {
    Outcome o;
    const GridSpec& g = cfg.grid;
    const Potentials p = Potentials::from_spec(cfg.potential, g);
    const HypothesisReport hyp = hypothesis_report(cfg.potential, g, cfg.carleman_v, cfg.V1, cfg.V2, cfg.alpha, cfg.beta);
    TestFunctionSpec spec;
    spec.cutoff_M = cfg.carleman_cutoff_M > 0.0 ? cfg.carleman_cutoff_M : 0.2 * g.half_width;
    std::vector<CarlemanCase> cases;
    if (!c.seeded) {
        cases = carleman_sweep(g, p, hyp.sup_xtB, cfg.carleman_mu, cfg.carleman_R, cfg.carleman_eps, cfg.carleman_v,
                               spec, cfg.carleman_time_samples);
    } else {
        // one random modulated bump per cell
        std::mt19937_64 rng(c.seed);
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        for (double mu : cfg.carleman_mu)
            for (double R : cfg.carleman_R) {
                TestFunctionSpec s = spec;
                s.core = TestFunctionSpec::Core::modulated_bump;
                for (int d = 0; d < g.dim; ++d) {
                    s.center[d] = 0.25 * spec.cutoff_M * U(rng);
                    s.wavevector[d] = 2.0 * U(rng);
                }
                s.width = 0.9 + 0.3 * U(rng);
                s.omega = 2.0 * U(rng);
                auto one = carleman_sweep(g, p, hyp.sup_xtB, {mu}, {R}, cfg.carleman_eps, cfg.carleman_v, s,
                                          cfg.carleman_time_samples);
                one.front().case_id = static_cast<int>(cases.size());
                cases.push_back(one.front());
            }
    }
    log(c, std::to_string(cases.size()) + " cells");
    StageRecord st{"carleman", true, {{"time_samples", static_cast<double>(cfg.carleman_time_samples)}}};
    double worst = 0.0;
    for (const auto& k : cases) {
        if (!k.admissible) continue;
        worst = std::max(worst, k.ratio);
        o.report.pairs.push_back({"carleman", k.ratio, 1.0, carleman_pair_slack});
    }
    for (const auto& pr : o.report.pairs) st.pass = st.pass && pr.pass();
    if (wants_csv(cfg.output_formats)) {
        fs::create_directories(dir);
        std::ostringstream m;
        write_carleman_csv(m, cases);
        write_text(dir / "carleman.csv", m.str());
    }
    o.report.stages.push_back(st);
    o.report.defects = {{"carleman_max_ratio", worst}, {"sup_xtB", hyp.sup_xtB}};
    return o;
}

Outcome run_hypotheses(const ExperimentConfig& cfg, const Common&, const fs::path&) {
    Outcome o;
    const HypothesisReport h = hypothesis_report(cfg.potential, cfg.grid, cfg.carleman_v, cfg.V1, cfg.V2, cfg.alpha, cfg.beta);
    o.report.stages.push_back({"hypotheses", true, {}});
    o.report.defects = {{"sup_xtB", h.sup_xtB},           {"M_A", h.M_A}, {"transversality_defect", h.transversality_defect},
                        {"kernel_defect", h.kernel_defect}, {"M1", h.M1},   {"M2", h.M2},
                        {"N1", h.N1}};
    return o;
}

Outcome run_full(const ExperimentConfig& cfg, const Common& c, const fs::path& dir) {
    PipelineOptions opt;
    opt.progress = [&c](const std::string& s) { log(c, "stage " + s); };
    Outcome o;
    o.report = run_pipeline(cfg, opt);
    write_pipeline_outputs(o.report, dir, cfg.output_formats);
    return o;
}

using Runner = Outcome (*)(const ExperimentConfig&, const Common&, const fs::path&);

int dispatch(Runner run, const std::string& name, const Common& c) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(c.config);
        if (!c.format.empty()) cfg.output_formats = c.format;
        if (!c.out.empty()) cfg.output_directory = c.out;
        cfg.validate();
        if (name == "pipeline") check_pipeline_config(cfg);
    } catch (const std::exception& e) {
        std::cerr << "covflow: config error: " << e.what() << "\n";
        return 1;
    }
    const fs::path dir = cfg.output_directory;
    Outcome o;
    try {
        o = run(cfg, c, dir);
    } catch (const ConfigError& e) {
        std::cerr << "covflow: config error: " << e.what() << "\n";
        return 1;
    } catch (const PipelineError& e) {
        std::cerr << "covflow: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "covflow: " << name << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "covflow: " << name << ": " << e.what() << "\n";
        return 2;
    }
    o.report.config_hash = config_hash(cfg);
    if (name != "pipeline" && wants_json(cfg.output_formats)) {
        fs::create_directories(dir);
        write_text(dir / "report.json", to_json(o.report).dump(2) + "\n");
    }
    const bool pass = o.pass && o.report.pass();
    if (!c.quiet) {
        for (const auto& s : o.report.stages) std::cout << (s.pass ? "PASS " : "FAIL ") << s.name << "\n";
        for (const auto& p : o.report.pairs)
            if (!p.pass()) std::cout << "FAIL pair " << p.anchor << " lhs=" << p.lhs << " rhs=" << p.rhs << "\n";
    }
    return pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"covflow: magnetic Schroedinger flows, transforms and weighted estimates"};
    app.require_subcommand(1);
    Common c;
    const std::vector<std::pair<std::string, Runner>> cmds{
        {"evolve", run_evolve},       {"gauge", run_gauge},       {"appell", run_appell},
        {"convexity", run_convexity}, {"carleman", run_carleman}, {"pipeline", run_full},
        {"hypotheses", run_hypotheses}};
    const std::map<std::string, std::string> help{
        {"evolve", "Evolve the configured flow and export snapshots"},
        {"gauge", "Transversal gauge reduction and its defects"},
        {"appell", "Appell transform residual and norm identities"},
        {"convexity", "Weighted norm log-convexity monitor"},
        {"carleman", "Carleman inequality sweep over (mu, R)"},
        {"pipeline", "Run all stages and write report.json"},
        {"hypotheses", "Constants of the potential hypotheses"}};
    std::vector<CLI::App*> subs;
    for (const auto& [name, run] : cmds) {
        CLI::App* s = app.add_subcommand(name, help.at(name));
        s->add_option("--config", c.config, "Config file (INI)")->required();
        s->add_option("--out", c.out, "Output directory (overrides [output] directory)");
        s->add_option("--format", c.format, "Output formats")->check(CLI::IsMember({"csv", "json", "both"}));
        s->add_option("--seed", c.seed, "Seed for random test-function suites");
        s->add_flag("--quiet", c.quiet, "Suppress progress output");
        subs.push_back(s);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "covflow: " << e.what() << "\n" << app.help();
        return 1;
    }
    for (std::size_t k = 0; k < subs.size(); ++k) {
        if (!subs[k]->parsed()) continue;
        c.seeded = subs[k]->count("--seed") > 0;
        return dispatch(cmds[k].second, cmds[k].first, c);
    }
    return 1;
}
