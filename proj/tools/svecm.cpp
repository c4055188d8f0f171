// Command-line front end: synthetic data, the analysis pipeline, one-off scenarios and the HTTP service.

#include "svecm/app/config.hpp"
#include "svecm/app/grid.hpp"
#include "svecm/app/pipeline.hpp"
#include "svecm/app/service.hpp"
#include "svecm/app/synth.hpp"
#include "svecm/bootstrap.hpp"
#include "svecm/jirf.hpp"
#include "svecm/vecm.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <map>

using namespace svecm;
using namespace svecm::app;

namespace {

struct PipelineArgs {
    std::string config_path;
    std::map<std::string, std::string> overrides;
};

void add_pipeline_options(CLI::App* cmd, PipelineArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "key = value config file");
    for (const auto& key : config_keys()) {
        auto* opt = cmd->add_option_function<std::string>(
            "--" + key.name, [&args, name = key.name](const std::string& v) { args.overrides[name] = v; }, key.help);
        opt->type_name("VALUE");
    }
}

PipelineConfig resolve(const PipelineArgs& args) {
    ConfigMap map = args.config_path.empty() ? ConfigMap{} : ConfigMap::load(args.config_path);
    for (const auto& [k, v] : args.overrides) map.set(k, v);
    return build_config(map);
}

int run_stages(const PipelineArgs& args, const std::string& until) {
    const auto config = resolve(args);
    const auto result = run_pipeline(config, until);
    std::cout << "stages:";
    for (const auto& s : result.stages_run) std::cout << ' ' << s;
    std::cout << "\noutput: " << result.output.string() << "\nmanifest sha256: " << result.manifest_hash << '\n';
    return 0;
}

std::uint64_t seed_or_env(const std::optional<std::uint64_t>& seed) {
    if (seed) return *seed;
    if (const char* env = std::getenv("SPARSEVECM_SEED")) return std::strtoull(env, nullptr, 10);
    return 0;
}

struct ScenarioArgs {
    std::string model = "out";
    std::vector<std::string> series;
    std::string commodity;
    std::string source = "series-std";
    std::vector<double> magnitudes;
    std::string period;
    std::size_t horizon = 8;
    std::string out;
};

void add_scenario_options(CLI::App* cmd, ScenarioArgs& a) {
    cmd->add_option("-m,--model", a.model, "pipeline output directory holding the model bundle")->capture_default_str();
    cmd->add_option("-s,--series", a.series, "series labels to shock (commodity.region)")->delimiter(',');
    cmd->add_option("--commodity", a.commodity, "shock every region of this commodity");
    cmd->add_option("--source", a.source, "series-std, residual-std or user")->capture_default_str();
    cmd->add_option("--magnitudes", a.magnitudes, "shock sizes for --source user")->delimiter(',');
    cmd->add_option("--period", a.period, "model period (default: the bundle's JIRF period)");
    cmd->add_option("--horizon", a.horizon, "largest horizon")->capture_default_str();
    cmd->add_option("-o,--out", a.out, "write JSON here instead of stdout");
}

jirf::ShockRequest to_request(const ScenarioArgs& a, const ModelBundle& bundle) {
    jirf::ShockRequest r;
    r.series = a.series;
    if (!a.commodity.empty())
        for (const auto& region : bundle.panel.region_order) r.series.push_back(a.commodity + "." + region);
    r.source = jirf::magnitude_source_from_string(a.source);
    r.user_magnitudes = a.magnitudes;
    r.period = a.period.empty() ? bundle.default_period : a.period;
    r.horizon = a.horizon;
    return r;
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty()) std::cout << text << '\n';
    else write_text(path, text + "\n");
}

ScenarioService* active_service = nullptr;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse VECM toolkit: elastic-net VAR estimation, effective rank and joint impulse responses"};
    app.require_subcommand(1);

    SynthConfig synth;
    std::string synth_out = "synthetic";
    std::string synth_commodities = "piglet,hog,pork";
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic cointegrated price bundle");
    synth_cmd->add_option("-o,--out", synth_out, "bundle directory")->capture_default_str();
    synth_cmd->add_option("--commodities", synth_commodities, "commodity names")->capture_default_str();
    synth_cmd->add_option("--regions", synth.regions, "regions per commodity")->capture_default_str();
    synth_cmd->add_option("--weeks", synth.weeks, "sample length T")->capture_default_str();
    synth_cmd->add_option("--rank", synth.rank, "true cointegrating rank (0: m/2)")->capture_default_str();
    synth_cmd->add_option("--alpha", synth.alpha, "error-correction speed")->capture_default_str();
    synth_cmd->add_option("--sparsity", synth.sparsity, "share of nonzero short-run coefficients")->capture_default_str();
    synth_cmd->add_option("--noise", synth.noise, "innovation scale")->capture_default_str();
    synth_cmd->add_option("--missing", synth.missing_rate, "probability a weekly cell is unobserved")->capture_default_str();
    synth_cmd->add_option("--sparse-regions", synth.sparse_regions, "regions with heavy missingness")->capture_default_str();
    synth_cmd->add_option("--periods", synth.periods, "equal-length periods in the generated config")->capture_default_str();
    synth_cmd->add_option("--start", synth.start, "first date")->capture_default_str();
    std::optional<std::uint64_t> synth_seed;
    synth_cmd->add_option("--seed", synth_seed, "generator seed (default: SPARSEVECM_SEED, else 0)");

    const std::vector<std::pair<std::string, std::string>> pipeline_cmds{
        {"run", "run the whole pipeline"},
        {"ingest", "aggregate, deflate, interpolate and log-transform the prices"},
        {"test", "ingest, then summary statistics, unit-root, cointegration and Chow tests"},
        {"fit", "run through lag selection and the elastic-net fits"},
        {"rank", "run through the VECM view, effective ranks and coefficient grids"},
    };
    const std::map<std::string, std::string> until{
        {"run", ""}, {"ingest", "ingest"}, {"test", "chow"}, {"fit", "fit"}, {"rank", "vecm_rank"}};
    PipelineArgs pargs;
    std::map<std::string, CLI::App*> pipeline_apps;
    for (const auto& [name, help] : pipeline_cmds) {
        auto* cmd = app.add_subcommand(name, help);
        add_pipeline_options(cmd, pargs);
        pipeline_apps[name] = cmd;
    }

    ScenarioArgs jargs;
    auto* jirf_cmd = app.add_subcommand("jirf", "point joint impulse response from a fitted bundle");
    add_scenario_options(jirf_cmd, jargs);

    ScenarioArgs bargs;
    std::size_t replicates = 500;
    double confidence = 0.95;
    std::optional<std::uint64_t> boot_seed;
    bool fixed_shocks = false;
    std::string draws_path;
    std::size_t threads = 0;
    auto* boot_cmd = app.add_subcommand("bootstrap", "joint impulse response with residual-bootstrap bands");
    add_scenario_options(boot_cmd, bargs);
    boot_cmd->add_option("-B,--replicates", replicates, "bootstrap replicates")->capture_default_str();
    boot_cmd->add_option("--confidence", confidence, "band level")->capture_default_str();
    boot_cmd->add_option("--seed", boot_seed, "master seed (default: SPARSEVECM_SEED, else 0)");
    boot_cmd->add_flag("--fixed-shocks", fixed_shocks, "keep shock sizes fixed across replicates");
    boot_cmd->add_option("--draws", draws_path, "write every replicate response as CSV");
    boot_cmd->add_option("--threads", threads, "worker threads (0: all cores)");

    std::string export_model = "out", export_period, export_matrix = "Pi", export_out;
    auto* export_cmd = app.add_subcommand("export", "write a coefficient grid and its rendering data");
    export_cmd->add_option("-m,--model", export_model, "pipeline output directory")->capture_default_str();
    export_cmd->add_option("--period", export_period, "model period (default: the bundle's JIRF period)");
    export_cmd->add_option("--matrix", export_matrix, "Pi or Gamma<k>")->capture_default_str();
    export_cmd->add_option("-o,--out", export_out, "output prefix; writes <prefix>.json and <prefix>_render.csv");

    std::string serve_model = "out", host = "127.0.0.1", ui_dir;
    int port = 8080;
    ServiceOptions service_options;
    auto* serve_cmd = app.add_subcommand("serve", "what-if scenario HTTP service over a fitted bundle");
    serve_cmd->add_option("-m,--model", serve_model, "pipeline output directory")->capture_default_str();
    serve_cmd->add_option("--host", host, "bind address")->capture_default_str();
    serve_cmd->add_option("--port", port, "port (0: any free port)")->capture_default_str();
    serve_cmd->add_option("--ui", ui_dir, "static explorer bundle mounted at /ui");
    serve_cmd->add_option("--workers", service_options.workers, "bootstrap job workers")->capture_default_str();
    serve_cmd->add_option("--max-pending", service_options.max_pending, "queued job limit")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth_cmd) {
            synth.commodities = split_list(synth_commodities);
            synth.seed = seed_or_env(synth_seed);
            const auto data = generate(synth);
            write_bundle(data, synth, synth_out);
            std::cout << "wrote " << data.observations.size() << " observations for "
                      << synth.commodities.size() * synth.regions << " series to " << synth_out << '\n';
            return 0;
        }
        for (const auto& [name, cmd] : pipeline_apps)
            if (*cmd) return run_stages(pargs, until.at(name));

        if (*jirf_cmd || *boot_cmd) {
            const auto& a = *jirf_cmd ? jargs : bargs;
            const auto bundle = load_bundle(a.model);
            const auto request = to_request(a, bundle);
            const auto& fit = bundle.fit(request.period);
            const auto slice = panel::slice_period(bundle.panel, request.period);
            const auto shock = jirf::build_shock(request, fit.series, &slice, &fit);
            auto point = jirf::compute_jirf(jirf::to_vma(fit, shock.horizon), fit.sigma, shock);
            if (*jirf_cmd) {
                emit(a.out, point.to_json());
                return 0;
            }
            bootstrap::BootstrapSpec spec;
            spec.replicates = replicates;
            spec.confidence = confidence;
            spec.seed = seed_or_env(boot_seed);
            spec.recompute_shocks = !fixed_shocks;
            spec.keep_draws = !draws_path.empty();
            spec.threads = threads;
            const auto dist = bootstrap::bootstrap_jirf(fit, slice, shock, spec);
            emit(a.out, bootstrap::with_bands(std::move(point), dist).to_json());
            if (!draws_path.empty()) write_text(draws_path, dist.draws_csv());
            for (const auto& w : dist.warnings) std::cerr << "warning: " << w << '\n';
            return 0;
        }
        if (*export_cmd) {
            const auto bundle = load_bundle(export_model);
            const auto period = export_period.empty() ? bundle.default_period : export_period;
            const auto grid = export_grid(vecm::to_vecm(bundle.fit(period)), export_matrix, period, bundle.commodities);
            if (export_out.empty()) {
                std::cout << grid.to_json().dump() << '\n';
            } else {
                write_text(export_out + ".json", grid.to_json().dump() + "\n");
                write_text(export_out + "_render.csv", grid.render_csv());
            }
            return 0;
        }
        if (*serve_cmd) {
            ScenarioService service(load_bundle(serve_model), service_options);
            const int bound = service.bind(host, port, ui_dir);
            std::cout << "listening on http://" << host << ':' << bound << std::endl;
            active_service = &service;
            std::signal(SIGINT, [](int) {
                if (active_service) active_service->stop();
            });
            std::signal(SIGTERM, [](int) {
                if (active_service) active_service->stop();
            });
            service.run();
            active_service = nullptr;
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error [" << e.code() << "]: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
