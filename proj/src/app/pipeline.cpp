#include "svecm/app/pipeline.hpp"

#include "svecm/app/grid.hpp"
#include "svecm/bootstrap.hpp"
#include "svecm/jirf.hpp"
#include "svecm/stattests.hpp"
#include "svecm/vecm.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <sstream>

namespace svecm::app {

namespace {

std::string safe_name(std::string_view s) {
    std::string out;
    for (const char c : s)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
    return out;
}

std::string fit_file(const std::string& period) { return "model/fit_" + safe_name(period) + ".json"; }
std::string fit_file(const std::string& period, const std::string& commodity) {
    return "model/fit_" + safe_name(period) + "_" + safe_name(commodity) + ".json";
}

// Rows [begin, end) of a panel as a standalone panel with one period.
panel::PricePanel row_window(const panel::PricePanel& p, std::size_t begin, std::size_t end, const std::string& name) {
    panel::PricePanel out = p;
    const auto b = static_cast<Eigen::Index>(begin), n = static_cast<Eigen::Index>(end - begin);
    out.stamps.assign(p.stamps.begin() + static_cast<long>(begin), p.stamps.begin() + static_cast<long>(end));
    out.values = p.values.middleRows(b, n);
    out.missing = p.missing.middleRows(b, n);
    out.periods = {{name, 0, end - begin}};
    return out;
}

struct Scenario {
    std::string name;
    jirf::ShockRequest request;
};

}  // namespace

const std::vector<std::string>& pipeline_stages() {
    static const std::vector<std::string> stages{"summarize", "unit_root", "chow",  "select_lag",
                                                 "fit",       "vecm_rank", "jirf", "bootstrap"};
    return stages;
}

PipelineError::PipelineError(std::string stage, const Error& cause)
    : Error("pipeline." + stage, stage + ": [" + cause.code() + "] " + cause.what()),
      stage_(std::move(stage)),
      cause_code_(cause.code()) {}

PipelineError::PipelineError(std::string stage, const std::exception& cause)
    : Error("pipeline." + stage, stage + ": " + cause.what()), stage_(std::move(stage)), cause_code_("internal") {}

PipelineResult run_pipeline(const PipelineConfig& config, const std::string& until) {
    if (!until.empty() && until != "ingest" &&
        std::find(pipeline_stages().begin(), pipeline_stages().end(), until) == pipeline_stages().end())
        throw Error("config.invalid", "unknown stage '" + until + "'");
    if (config.prices.empty()) throw Error("config.invalid", "prices path is empty");

    const auto out = config.output;
    std::filesystem::create_directories(out);
    for (const char* stale : {"manifest.json", "manifest.partial.json", ".partial"}) std::filesystem::remove(out / stale);

    Json manifest;
    manifest["format"] = "svecm-manifest/1";
    Json echo = Json::object();
    for (const auto& [k, v] : config.source.entries()) echo[k] = v;
    manifest["config"] = echo;
    manifest["inputs"] = Json::array();
    manifest["ingest"] = Json::object();
    manifest["stages"] = Json::array();
    std::vector<std::string> warnings;

    Json* artifacts = nullptr;
    auto emit = [&](const std::string& rel, const std::string& text) {
        write_text(out / rel, text);
        artifacts->push_back(Json{{"path", rel}, {"sha256", sha256_hex(text)}});
    };

    PipelineResult result;
    result.output = out;

    auto finish = [&](const std::string& name) {
        const auto text = manifest.dump(1) + "\n";
        write_text(out / name, text);
        return text;
    };

    bool stopped = false;
    auto run_stage = [&](const std::string& name, const std::function<std::string()>& body) {
        if (stopped) return;
        Json entry{{"name", name}, {"status", "ok"}, {"artifacts", Json::array()}};
        artifacts = &entry["artifacts"];
        try {
            const auto note = body();
            if (!note.empty()) {
                entry["status"] = "skipped";
                entry["reason"] = note;
            }
        } catch (const std::exception& e) {
            PipelineError err = [&] {
                if (const auto* pe = dynamic_cast<const Error*>(&e)) return PipelineError(name, *pe);
                return PipelineError(name, e);
            }();
            entry["status"] = "failed";
            entry["error"] = Json{{"code", err.cause_code()}, {"message", e.what()}};
            if (name == "ingest") manifest["ingest"] = entry;
            else manifest["stages"].push_back(entry);
            manifest["warnings"] = warnings;
            finish("manifest.partial.json");
            write_text(out / ".partial", "failed at " + name + "\n");
            throw err;
        }
        if (name == "ingest") manifest["ingest"] = entry;
        else manifest["stages"].push_back(entry);
        result.stages_run.push_back(name);
        if (name == until) stopped = true;
    };

    // Shared state between stages.
    panel::PricePanel levels, logp;
    std::vector<std::string> periods;
    std::map<std::string, std::size_t> lags;
    std::map<std::string, varnet::VarFit> fits;
    std::map<std::pair<std::string, std::string>, varnet::VarFit> sub_fits;
    std::string jirf_period;
    std::vector<Scenario> scenarios;
    std::vector<jirf::JirfResult> points;
    std::vector<jirf::ShockScenario> resolved;

    run_stage("ingest", [&]() -> std::string {
        const auto prices_text = read_text(config.prices);
        manifest["inputs"].push_back(Json{{"role", "prices"}, {"file", config.prices.filename().string()},
                                          {"bytes", prices_text.size()}, {"sha256", sha256_hex(prices_text)}});
        std::istringstream prices_in(prices_text);
        auto raw = panel::read_observations_csv(prices_in);
        if (!config.commodities.empty()) {
            std::erase_if(raw, [&](const panel::RawObservation& o) {
                return std::find(config.commodities.begin(), config.commodities.end(), o.commodity) == config.commodities.end();
            });
            if (raw.empty()) throw Error("panel.no_observations", "no observations for the configured commodities");
        }
        levels = panel::aggregate(raw, config.commodities);
        for (const auto& c : config.commodities)
            if (std::find(levels.commodity_order.begin(), levels.commodity_order.end(), c) == levels.commodity_order.end())
                warnings.push_back("commodity '" + c + "' has no observations");
        if (!config.cpi.empty()) {
            const auto cpi_text = read_text(config.cpi);
            manifest["inputs"].push_back(Json{{"role", "cpi"}, {"file", config.cpi.filename().string()},
                                              {"bytes", cpi_text.size()}, {"sha256", sha256_hex(cpi_text)}});
            std::istringstream cpi_in(cpi_text);
            levels = panel::deflate(levels, panel::read_cpi_csv(cpi_in), *config.cpi_base);
        }
        auto defs = config.periods;
        if (defs.empty()) defs.push_back({"All", levels.stamps.front(), levels.stamps.back() + std::chrono::days{6}});
        levels = panel::tag_periods(levels, defs);
        levels = panel::exclude_sparse_regions(levels, config.max_missing);
        logp = panel::log_transform(panel::interpolate(levels));
        for (const auto& p : logp.periods) periods.push_back(p.name);
        jirf_period = config.jirf_period.empty() ? periods.front() : config.jirf_period;
        (void)logp.period(jirf_period);

        std::ostringstream csv;
        panel::write_panel_csv(logp, csv);
        emit("panel/panel.csv", csv.str());
        emit("panel/panel.json", panel::panel_sidecar_json(logp));
        std::ostringstream lcsv;
        panel::write_panel_csv(levels, lcsv);
        emit("panel/levels.csv", lcsv.str());
        emit("panel/levels.json", panel::panel_sidecar_json(levels));
        warnings.insert(warnings.end(), logp.warnings.begin(), logp.warnings.end());
        return {};
    });

    run_stage("summarize", [&]() -> std::string {
        emit("summary.json", summary_to_json(panel::summarize(levels, periods)).dump(1) + "\n");
        return {};
    });

    run_stage("unit_root", [&]() -> std::string {
        Json unit = Json::array(), coint = Json::array();
        for (const auto& p : periods) {
            const auto slice = panel::slice_period(logp, p);
            Json row{{"period", p}};
            row["all"] = panel_unit_root_to_json(stattests::panel_unit_root(slice, config.adf_spec, config.adf_max_lag, config.threads));
            Json by = Json::object();
            for (const auto& c : slice.commodity_order) {
                const auto sub = panel::select_commodity(slice, c);
                by[c] = panel_unit_root_to_json(stattests::panel_unit_root(sub, config.adf_spec, config.adf_max_lag, config.threads));
                if (slice.region_order.size() >= 2)
                    coint.push_back(pairwise_to_json(stattests::pairwise_cointegration(
                        slice, c, p, config.significance, config.adf_max_lag, config.threads)));
            }
            row["commodities"] = by;
            unit.push_back(row);
        }
        emit("unit_root.json", unit.dump(1) + "\n");
        emit("cointegration.json", coint.dump(1) + "\n");
        return {};
    });

    run_stage("chow", [&]() -> std::string {
        Json tests = Json::array();
        for (std::size_t k = 1; k < logp.periods.size(); ++k) {
            const auto& a = logp.periods[k - 1];
            const auto& b = logp.periods[k];
            const auto window = row_window(logp, a.begin, b.end, a.name + "|" + b.name);
            const auto brk = b.begin - a.begin;
            auto attempt = [&](const panel::PricePanel& w, const std::string& slice) {
                Json t{{"boundary", a.name + "|" + b.name}, {"date", panel::format_date(logp.stamps[b.begin])}, {"slice", slice}};
                try {
                    t["result"] = chow_to_json(stattests::chow_test(w, brk, config.chow_lags));
                } catch (const Error& e) {
                    if (e.code() != "stattests.subsample_too_short") throw;
                    t["skipped"] = e.what();
                }
                tests.push_back(t);
            };
            attempt(window, "full");
            for (const auto& c : window.commodity_order) attempt(panel::select_commodity(window, c), c);
        }
        emit("chow.json", tests.dump(1) + "\n");
        return logp.periods.size() < 2 ? "single period, no boundary to test" : "";
    });

    run_stage("select_lag", [&]() -> std::string {
        Json doc = Json::array();
        varnet::LagSelectionConfig lc;
        lc.solver.tolerance = config.net.tolerance;
        lc.solver.max_sweeps = config.net.max_sweeps;
        lc.threads = config.threads;
        for (const auto& p : periods) {
            Json row{{"period", p}};
            if (config.lags) {
                lags[p] = *config.lags;
                row["fixed"] = *config.lags;
            } else {
                const auto sel = varnet::select_lag(panel::slice_period(logp, p).values, config.max_lags, lc);
                lags[p] = sel.lags;
                row["selection"] = lag_selection_to_json(sel);
            }
            doc.push_back(row);
        }
        emit("lag.json", doc.dump(1) + "\n");
        return {};
    });

    run_stage("fit", [&]() -> std::string {
        Json bundle{{"periods", periods}, {"default_period", jirf_period}, {"commodities", logp.commodity_order},
                    {"fits", Json::object()}};
        for (const auto& p : periods) {
            const auto slice = panel::slice_period(logp, p);
            auto fit = varnet::fit_var(slice, lags.at(p), config.net);
            emit(fit_file(p), varfit_to_json(fit).dump() + "\n");
            bundle["fits"][p] = fit_file(p);
            for (const auto& w : fit.warnings) warnings.push_back(p + ": " + w);
            fits.emplace(p, std::move(fit));
            if (config.commodity_ranks && slice.commodity_order.size() > 1)
                for (const auto& c : slice.commodity_order) {
                    auto sub = varnet::fit_var(panel::select_commodity(slice, c), lags.at(p), config.net);
                    emit(fit_file(p, c), varfit_to_json(sub).dump() + "\n");
                    sub_fits.emplace(std::make_pair(p, c), std::move(sub));
                }
        }
        emit("model/bundle.json", bundle.dump(1) + "\n");
        return {};
    });

    run_stage("vecm_rank", [&]() -> std::string {
        std::vector<vecm::RankInput> inputs;
        for (const auto& p : periods) {
            inputs.push_back({p, "full", &fits.at(p)});
            for (const auto& c : logp.commodity_order)
                if (auto it = sub_fits.find({p, c}); it != sub_fits.end()) inputs.push_back({p, c, &it->second});
        }
        const auto table = vecm::rank_report(inputs, config.rank_tolerance);
        emit("rank.json", table.to_json() + "\n");
        emit("rank.txt", table.to_text());
        for (const auto& p : periods) {
            const auto view = vecm::to_vecm(fits.at(p));
            for (const auto& name : grid_names(view)) {
                const auto grid = export_grid(view, name, p, logp.commodity_order);
                const auto base = "grids/" + safe_name(p) + "/" + name;
                emit(base + ".json", grid.to_json().dump() + "\n");
                emit(base + "_render.csv", grid.render_csv());
            }
        }
        return {};
    });

    run_stage("jirf", [&]() -> std::string {
        const auto& fit = fits.at(jirf_period);
        const auto slice = panel::slice_period(logp, jirf_period);
        const auto vma = jirf::to_vma(fit, config.horizon);
        Json vdoc{{"period", jirf_period}, {"series", vma.series}, {"max_horizon", vma.max_horizon}, {"coefficients", Json::array()}};
        for (const auto& a : vma.coefficients) vdoc["coefficients"].push_back(matrix_to_json(a));
        emit("model/vma_" + safe_name(jirf_period) + ".json", vdoc.dump() + "\n");

        auto request = [&](std::vector<std::string> series) {
            jirf::ShockRequest r;
            r.series = std::move(series);
            r.source = config.shock_source;
            r.period = jirf_period;
            r.horizon = config.horizon;
            return r;
        };
        for (const auto& c : logp.commodity_order) {
            std::vector<std::string> s;
            for (const auto& r : logp.region_order) s.push_back(c + "." + r);
            scenarios.push_back({"all_" + c, request(s)});
        }
        if (!config.focus_regions.empty()) {
            std::vector<std::string> s;
            for (const auto& r : config.focus_regions) s.push_back(config.focus_commodity + "." + r);
            scenarios.push_back({"focus_" + config.focus_commodity, request(s)});
        }
        for (const auto& sc : scenarios) {
            auto shock = jirf::build_shock(sc.request, fit.series, &slice, &fit);
            auto point = jirf::compute_jirf(vma, fit.sigma, shock);
            emit("jirf/" + safe_name(sc.name) + ".json", point.to_json() + "\n");
            emit("jirf/" + safe_name(sc.name) + ".csv", point.to_csv());
            resolved.push_back(std::move(shock));
            points.push_back(std::move(point));
        }
        return {};
    });

    run_stage("bootstrap", [&]() -> std::string {
        if (!config.run_bootstrap) return "disabled by config";
        const auto& fit = fits.at(jirf_period);
        const auto slice = panel::slice_period(logp, jirf_period);
        for (std::size_t k = 0; k < scenarios.size(); ++k) {
            const auto dist = bootstrap::bootstrap_jirf(fit, slice, resolved[k], config.boot);
            const auto banded = bootstrap::with_bands(points[k], dist);
            const auto base = "jirf/" + safe_name(scenarios[k].name) + "_bootstrap";
            emit(base + ".json", banded.to_json() + "\n");
            if (config.boot.keep_draws) emit(base + "_draws.csv", dist.draws_csv());
            for (const auto& w : dist.warnings) warnings.push_back(scenarios[k].name + ": " + w);
        }
        return {};
    });

    if (!until.empty()) manifest["until"] = until;
    manifest["warnings"] = warnings;
    result.manifest_text = finish("manifest.json");
    result.manifest_hash = sha256_hex(result.manifest_text);
    return result;
}

const varnet::VarFit& ModelBundle::fit(const std::string& period) const {
    const auto it = fits.find(period);
    if (it == fits.end()) throw Error("period.unknown", "no fitted model for period '" + period + "'");
    return it->second;
}

ModelBundle load_bundle(const std::filesystem::path& dir) {
    ModelBundle b;
    b.dir = dir;
    if (!std::filesystem::exists(dir / "model/bundle.json"))
        throw Error("model.missing", "no fitted model bundle under " + dir.string());
    const auto doc = Json::parse(read_text(dir / "model/bundle.json"));
    b.panel = panel::load_panel(dir / "panel/panel.csv", dir / "panel/panel.json");
    b.periods = doc.at("periods").get<std::vector<std::string>>();
    b.default_period = doc.at("default_period").get<std::string>();
    b.commodities = doc.at("commodities").get<std::vector<std::string>>();
    for (const auto& [period, file] : doc.at("fits").items()) {
        auto fit = varfit_from_json(Json::parse(read_text(dir / file.get<std::string>())));
        b.fits.emplace(period, std::move(fit));
    }
    return b;
}

}  // namespace svecm::app
