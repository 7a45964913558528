#include "ncts/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ncts/analysis.hpp"
#include "ncts/log.hpp"
#include "ncts/preset.hpp"
#include "ncts/roundtrip.hpp"
#include "ncts/sdp.hpp"
#include "ncts/simulator.hpp"
#include "ncts/synthesis.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ncts {

namespace {

struct ValidationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> overrides;
    std::optional<double> step;
    std::optional<double> horizon;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--seed", c.seed, "Random seed for the switch/attack draws");
    sub->add_option("--out", c.out, "Output directory");
    sub->add_option("--override", c.overrides, "Scalar override key=value (repeatable)")->allow_extra_args(false)->take_all();
    sub->add_option("--step", c.step, "Integration step [s]");
    sub->add_option("--horizon", c.horizon, "Simulation horizon [s]");
}

std::pair<std::string, double> split_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ValidationFailure("override '" + kv + "' is not of the form key=value");
    }
    const std::string key = kv.substr(0, eq);
    const std::string val = kv.substr(eq + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(val, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != val.size() || val.empty()) {
        throw ValidationFailure("override '" + kv + "': value is not a number");
    }
    return {key, v};
}

void apply_overrides(const std::vector<std::string>& kvs, CascadeModel& md, TheoremScalars* sc) {
    for (const auto& kv : kvs) {
        const auto [key, v] = split_override(kv);
        if (is_model_scalar(key)) {
            apply_override(md, key, v);
        } else if (sc != nullptr && is_theorem_scalar(key)) {
            apply_override(*sc, key, v);
        } else {
            throw ValidationFailure("unknown override '" + key + "'");
        }
    }
}

void require_valid(const CascadeModel& md) {
    const auto rep = validate(md);
    if (!rep.ok()) {
        throw ValidationFailure("model validation failed:\n" + rep.summary());
    }
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationFailure("cannot open '" + path + "': file not found");
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationFailure(path + ": " + e.what());
    }
}

// Model file, preset file or preset name.
Preset read_model_or_preset(const std::string& arg) {
    const fs::path p = resolve_preset(arg);
    if (!fs::exists(p)) {
        throw ValidationFailure("cannot open '" + p.string() + "': file not found");
    }
    const json j = read_json(p.string());
    if (j.contains("model")) {
        Preset pr = preset_from_json(j);
        if (pr.name.empty()) {
            pr.name = p.stem().string();
        }
        return pr;
    }
    Preset pr;
    pr.name = p.stem().string();
    pr.model = model_from_json(j);
    return pr;
}

fs::path out_dir(const Common& c) {
    const fs::path d = c.out.empty() ? fs::path(".") : fs::path(c.out);
    fs::create_directories(d);
    return d;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot write '" + p.string() + "'");
    }
    f << text;
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

Scenario scenario_for(const Preset& pr, const std::optional<std::string>& scenario_path, const Common& c) {
    Scenario s;
    if (scenario_path) {
        json j = read_json(*scenario_path);
        if (j.contains("scenario")) {
            j = j.at("scenario");
        }
        s = scenario_from_json(j, pr.model);
    } else if (!pr.scenario.empty()) {
        s = pr.build_scenario();
    } else {
        s = default_scenario(pr.model);
    }
    if (c.seed) s.seed = *c.seed;
    if (c.step) s.step = *c.step;
    if (c.horizon) s.horizon = *c.horizon;
    const auto rep = validate_scenario(s, pr.model);
    if (!rep.ok()) {
        throw ValidationFailure("scenario validation failed:\n" + rep.summary());
    }
    return s;
}

int synthesis_exit(SynthesisStatus s) {
    switch (s) {
    case SynthesisStatus::feasible:
        return kExitOk;
    case SynthesisStatus::infeasible:
    case SynthesisStatus::not_admissible:
        return kExitInfeasible;
    case SynthesisStatus::solver_failure:
        return kExitRuntime;
    }
    return kExitRuntime;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

json terminal_summary(const SimTrace& tr) {
    const double n0 = tr.state(0).norm();
    const double nT = tr.state(tr.size() - 1).norm();
    double max_res = 0.0;
    std::size_t eq5 = 0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        max_res = std::max(max_res, tr.alg_residual[i]);
        eq5 += tr.eq5_violation[i] ? 1 : 0;
    }
    return {{"initial_norm", n0},
            {"terminal_norm", nT},
            {"decay_ratio", n0 > 0.0 ? nT / n0 : 0.0},
            {"max_algebraic_residual", max_res},
            {"eq5_violations", eq5},
            {"steps", tr.size()}};
}

// ---------------------------------------------------------------- commands

int cmd_synthesize(const std::string& model_path, const std::string& mode, const Common& c, std::ostream& out) {
    Preset pr = read_model_or_preset(model_path);
    apply_overrides(c.overrides, pr.model, &pr.scalars);
    require_valid(pr.model);
    if (mode == "known") {
        pr.fault_mode = FaultMode::known;
    } else if (mode == "unknown") {
        pr.fault_mode = FaultMode::unknown;
    }
    const auto res = synthesize(pr.model, pr.scalars, pr.fault_spec());
    const fs::path dir = out_dir(c);
    if (res.certificate) {
        write_json(dir / "certificate.json", res.certificate->to_json());
    }
    write_json(dir / "synthesis.json", res.to_json());
    out << "synthesis: " << to_string(res.status);
    if (res.certificate) {
        out << "  K2 = " << fmt(res.certificate->K2(0, 0));
        for (Eigen::Index k = 1; k < res.certificate->K2.size(); ++k) {
            out << ", " << fmt(res.certificate->K2(k));
        }
    }
    if (!res.message.empty()) {
        out << "  (" << res.message << ")";
    }
    out << "\n";
    return synthesis_exit(res.status);
}

int cmd_simulate(const std::string& model_path, const std::string& cert_path,
                 const std::optional<std::string>& scenario_path, const Common& c, std::ostream& out) {
    Preset pr = read_model_or_preset(model_path);
    apply_overrides(c.overrides, pr.model, nullptr);
    require_valid(pr.model);
    const GainCertificate cert = certificate_from_json(read_json(cert_path));
    const Scenario s = scenario_for(pr, scenario_path, c);
    const SimTrace tr = run(pr.model, cert, s);
    const fs::path dir = out_dir(c);
    {
        std::ostringstream csv;
        write_csv(tr, csv);
        write_text(dir / "trace.csv", csv.str());
    }
    json stats = transmission_stats(tr).to_json();
    stats["trace"] = terminal_summary(tr);
    stats["seed"] = s.seed;
    write_json(dir / "stats.json", stats);
    out << "simulate: " << tr.size() << " steps, release ratio " << fmt(stats["ratio"].get<double>())
        << ", terminal/initial norm " << fmt(stats["trace"]["decay_ratio"].get<double>()) << "\n";
    return kExitOk;
}

int cmd_analyze(const std::string& trace_path, const std::optional<std::string>& model_path,
                const std::optional<std::string>& triple_path, const std::optional<std::string>& cert_path,
                const Common& c, std::ostream& out) {
    std::ifstream in(trace_path);
    if (!in) {
        throw ValidationFailure("cannot open '" + trace_path + "': file not found");
    }
    SimTrace tr;
    try {
        tr = read_csv(in);
    } catch (const std::invalid_argument& e) {
        throw ValidationFailure(trace_path + ": " + e.what());
    }
    std::optional<Preset> pr;
    if (model_path) {
        pr = read_model_or_preset(*model_path);
        apply_overrides(c.overrides, pr->model, nullptr);
    }
    DissipativityTriple triple;
    if (triple_path) {
        json j = read_json(*triple_path);
        if (j.contains("dissipativity")) {
            j = j.at("dissipativity");
        }
        triple.Q = matrix_from_json(j.at("Q"), "Q");
        triple.S = matrix_from_json(j.at("S"), "S");
        triple.R = matrix_from_json(j.at("R"), "R");
        triple.gamma = j.at("gamma").get<double>();
        for (const auto& kv : c.overrides) {
            const auto [key, v] = split_override(kv);
            if (key == "gamma") triple.gamma = v;
        }
    } else if (pr) {
        triple = pr->model.dissipativity;
    } else {
        throw ValidationFailure("analyze needs --triple or --model for the supply rate");
    }
    json report;
    report["dissipativity"] = dissipativity_index(tr, triple).to_json();
    if (cert_path) {
        if (!pr) {
            throw ValidationFailure("analyze --certificate needs --model");
        }
        const GainCertificate cert = certificate_from_json(read_json(*cert_path));
        const LkfWeights w = lkf_weights(pr->model, cert);
        const double t0 = std::max({w.zeta2, w.d2, w.tau2, w.theta_bar}) + tr.t.front();
        json samples = json::array();
        for (double t = std::ceil(t0 * 2.0) / 2.0; t <= tr.t.back() + 1e-9; t += 0.5) {
            const auto terms = lkf_terms(tr, w, t, pr->model.theta_bar);
            samples.push_back({{"t", t}, {"V", terms.total()}, {"V1", terms.V1}, {"V2", terms.V2},
                               {"V3", terms.V3}, {"V4", terms.V4}});
        }
        report["lkf"] = samples;
    }
    if (c.out.empty()) {
        out << report.dump(2) << "\n";
    } else {
        write_json(out_dir(c) / "analysis.json", report);
        out << "analyze: J(T) = " << fmt(report["dissipativity"]["terminal"].get<double>()) << ", min J = "
            << fmt(report["dissipativity"]["min_J"].get<double>()) << "\n";
    }
    return kExitOk;
}

int cmd_verify(int draws, const std::optional<std::string>& fixtures, const Common& c, std::ostream& out) {
    const std::uint64_t seed = c.seed.value_or(1);
    bool ok = true;
    json report;
    json lemmas = json::array();
    for (Lemma l : all_lemmas()) {
        const auto s = lemma_sweep(l, draws, seed);
        ok = ok && s.failures == 0;
        lemmas.push_back(s.to_json());
        out << "lemma " << to_string(l) << ": min gap " << fmt(s.min_gap) << (s.failures ? "  FAIL" : "") << "\n";
    }
    report["lemmas"] = lemmas;

    json rt = json::array();
    const fs::path dir = fixtures ? fs::path(*fixtures) : data_dir() / "fixtures" / "sdpa";
    if (!fs::is_directory(dir)) {
        throw ValidationFailure("fixture directory '" + dir.string() + "' not found");
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".json") {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        const auto chk = check_fixture(f);
        ok = ok && chk.ok;
        rt.push_back(chk.to_json());
        out << "fixture " << chk.name << ": " << (chk.ok ? "ok" : "FAIL") << "  (file " << fmt(chk.file_vs_external)
            << ", system " << fmt(chk.system_vs_external) << ")\n";
    }
    report["fixtures"] = rt;
    report["ok"] = ok;
    if (!c.out.empty()) {
        write_json(out_dir(c) / "verify.json", report);
    }
    return ok ? kExitOk : kExitValidation;
}

int cmd_export(const std::string& model_path, int theorem, const std::string& objective,
               const std::optional<double>& box, const Common& c, std::ostream& out) {
    Preset pr = read_model_or_preset(model_path);
    apply_overrides(c.overrides, pr.model, &pr.scalars);
    require_valid(pr.model);
    const LmiSystem sys = theorem == 1 ? build_theorem1(pr.model, pr.model.fault.realized_or_mean(), pr.scalars)
                                       : build_theorem2(pr.model, pr.scalars);
    SdpaOptions o;
    o.objective = objective == "max_eig" ? SdpaObjective::max_eig : SdpaObjective::feasibility;
    o.box_bound = box;
    const std::string text = export_sdpa(sys, o);
    if (c.out.empty()) {
        out << text;
    } else {
        const fs::path p(c.out);
        if (p.has_parent_path()) {
            fs::create_directories(p.parent_path());
        }
        write_text(p, text);
    }
    return kExitOk;
}

int cmd_case(const std::string& name, const Common& c, std::ostream& out) {
    const fs::path path = resolve_preset(name);
    if (!fs::exists(path)) {
        throw ValidationFailure("unknown case '" + name + "' (no file " + path.string() + ")");
    }
    Preset pr = load_preset(path);
    apply_overrides(c.overrides, pr.model, &pr.scalars);
    require_valid(pr.model);
    const fs::path dir = out_dir(c);

    const auto res = synthesize(pr.model, pr.scalars, pr.fault_spec());
    write_json(dir / "synthesis.json", res.to_json());
    out << pr.name << ": synthesis " << to_string(res.status);
    if (!res.message.empty()) {
        out << " (" << res.message << ")";
    }
    out << "\n";
    if (!res.ok()) {
        return synthesis_exit(res.status);
    }
    const GainCertificate& cert = *res.certificate;
    write_json(dir / "certificate.json", cert.to_json());

    const Scenario s = scenario_for(pr, std::nullopt, c);
    const SimTrace tr = run(pr.model, cert, s);
    {
        std::ostringstream csv;
        write_csv(tr, csv);
        write_text(dir / "trace.csv", csv.str());
    }
    json stats = transmission_stats(tr).to_json();
    stats["trace"] = terminal_summary(tr);
    stats["seed"] = s.seed;

    // dissipativity is defined from rest
    Scenario rest = zero_initial(s);
    const SimTrace tr0 = run(pr.model, cert, rest);
    stats["dissipativity_zero_state"] = dissipativity_index(tr0, pr.model.dissipativity).to_json();
    write_json(dir / "stats.json", stats);
    out << pr.name << ": release ratio " << fmt(stats["ratio"].get<double>()) << ", terminal/initial norm "
        << fmt(stats["trace"]["decay_ratio"].get<double>()) << ", min J (from rest) "
        << fmt(stats["dissipativity_zero_state"]["min_J"].get<double>()) << "\n";
    return kExitOk;
}

} // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Gain synthesis, simulation and analysis for descriptor networked cascade loops", "ncts"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    Common common;
    std::string model_path, cert_path, trace_path, case_name, mode = "preset", objective = "feasibility";
    std::optional<std::string> scenario_path, triple_path, analyze_model, analyze_cert, fixtures;
    std::optional<double> box;
    int theorem = 2;
    int draws = 1000;

    auto* syn = app.add_subcommand("synthesize", "Model JSON -> gain certificate JSON");
    syn->add_option("model", model_path, "Model or preset file")->required();
    syn->add_option("--fault-mode", mode, "known | unknown | preset")
        ->check(CLI::IsMember({"known", "unknown", "preset"}));
    add_common(syn, common);

    auto* sim = app.add_subcommand("simulate", "Model + certificate (+ scenario) -> trace CSV and stats JSON");
    sim->add_option("model", model_path, "Model or preset file")->required();
    sim->add_option("certificate", cert_path, "Certificate JSON")->required();
    sim->add_option("scenario", scenario_path, "Scenario JSON");
    add_common(sim, common);

    auto* ana = app.add_subcommand("analyze", "Trace CSV + supply rate -> dissipativity / LKF JSON");
    ana->add_option("trace", trace_path, "Trace CSV")->required();
    ana->add_option("--model", analyze_model, "Model or preset file (supply rate and LKF data)");
    ana->add_option("--triple", triple_path, "JSON with Q, S, R, gamma");
    ana->add_option("--certificate", analyze_cert, "Certificate JSON for the LKF evaluation");
    add_common(ana, common);

    auto* ver = app.add_subcommand("verify", "Lemma oracles and SDPA round-trip fixtures");
    ver->add_option("--draws", draws, "Random draws per lemma")->check(CLI::PositiveNumber);
    ver->add_option("--fixtures", fixtures, "Fixture directory");
    add_common(ver, common);

    auto* exp = app.add_subcommand("export-sdpa", "Model -> SDPA sparse (.dat-s)");
    exp->add_option("model", model_path, "Model or preset file")->required();
    exp->add_option("--theorem", theorem, "1 (known fault) or 2 (unknown fault)")->check(CLI::IsMember({1, 2}));
    exp->add_option("--objective", objective, "feasibility | max_eig")
        ->check(CLI::IsMember({"feasibility", "max_eig"}));
    exp->add_option("--box", box, "Bound |x_i| <= box as an extra diagonal block");
    add_common(exp, common);

    auto* cas = app.add_subcommand("case", "Run a preset end to end");
    cas->add_option("name", case_name, "case1 | case2 | case3 or a preset file")->required();
    add_common(cas, common);

    const auto subs = app.get_subcommands({});
    if (!args.empty() && !args.front().empty() && args.front()[0] != '-' &&
        std::none_of(subs.begin(), subs.end(), [&](const CLI::App* s) { return s->get_name() == args.front(); })) {
        err << "error: unknown subcommand '" << args.front() << "'\n\n" << app.help();
        return kExitUsage;
    }
    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (syn->parsed()) return cmd_synthesize(model_path, mode, common, out);
        if (sim->parsed()) return cmd_simulate(model_path, cert_path, scenario_path, common, out);
        if (ana->parsed()) return cmd_analyze(trace_path, analyze_model, triple_path, analyze_cert, common, out);
        if (ver->parsed()) return cmd_verify(draws, fixtures, common, out);
        if (exp->parsed()) return cmd_export(model_path, theorem, objective, box, common, out);
        if (cas->parsed()) return cmd_case(case_name, common, out);
    } catch (const ValidationFailure& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ModelFormatError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const SimulationError& e) {
        err << "error: simulation failed: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    err << app.help();
    return kExitUsage;
}

} // namespace ncts
