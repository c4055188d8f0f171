#include "svecm/app/service.hpp"

#include "svecm/app/grid.hpp"
#include "svecm/bootstrap.hpp"
#include "svecm/jirf.hpp"
#include "svecm/varnet.hpp"
#include "svecm/vecm.hpp"

#include <httplib.h>

#include <cmath>

namespace svecm::app {

namespace {

int status_for(const std::string& code) {
    if (code == "scenario.unknown_series" || code == "job.not_found" || code == "period.unknown" ||
        code == "panel.unknown_period" || code == "matrix.unknown" || code == "route.not_found")
        return 404;
    if (code == "scenario.degenerate") return 422;
    if (code == "job.queue_full") return 429;
    if (code.rfind("scenario.", 0) == 0 || code.rfind("request.", 0) == 0 || code.rfind("config.", 0) == 0) return 400;
    return 500;
}

HttpResponse from_error(const Error& e) { return problem(status_for(e.code()), e.code(), e.what()); }

std::vector<std::string> split_path(std::string_view path) {
    if (const auto q = path.find('?'); q != std::string_view::npos) path = path.substr(0, q);
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start < path.size()) {
        const auto end = path.find('/', start);
        const auto piece = path.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        if (!piece.empty()) parts.emplace_back(piece);
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return parts;
}

struct ParsedScenario {
    jirf::ShockRequest request;
    std::size_t replicates = 200;
    std::uint64_t seed = 0;
    double confidence = 0.95;
    bool recompute_shocks = true;
};

// Collects every field problem before giving up, so a client can fix them in one go.
std::optional<ParsedScenario> parse_scenario(std::string_view body, const ModelBundle& bundle, const ServiceOptions& options,
                                             bool with_bootstrap, HttpResponse& failure) {
    Json doc;
    try {
        doc = Json::parse(body);
    } catch (const std::exception& e) {
        failure = problem(400, "request.malformed", std::string("body is not valid JSON: ") + e.what());
        return std::nullopt;
    }
    if (!doc.is_object()) {
        failure = problem(400, "request.malformed", "body must be a JSON object");
        return std::nullopt;
    }
    ParsedScenario out;
    out.request.period = bundle.default_period;
    Json errors = Json::array();
    auto bad = [&](const std::string& field, const std::string& message) {
        errors.push_back(Json{{"field", field}, {"message", message}});
    };

    if (!doc.contains("series")) bad("series", "required");
    else if (!doc["series"].is_array()) bad("series", "must be an array of series labels");
    else
        for (const auto& s : doc["series"]) {
            if (!s.is_string()) {
                bad("series", "every entry must be a string");
                break;
            }
            out.request.series.push_back(s.get<std::string>());
        }
    if (doc.contains("source")) {
        if (!doc["source"].is_string()) bad("source", "must be a string");
        else
            try {
                out.request.source = jirf::magnitude_source_from_string(doc["source"].get<std::string>());
            } catch (const Error& e) {
                bad("source", e.what());
            }
    }
    if (doc.contains("magnitudes")) {
        if (!doc["magnitudes"].is_array()) bad("magnitudes", "must be an array of numbers");
        else
            for (const auto& v : doc["magnitudes"]) {
                if (!v.is_number()) {
                    bad("magnitudes", "every entry must be a number");
                    break;
                }
                out.request.user_magnitudes.push_back(v.get<double>());
            }
    }
    if (out.request.source == jirf::MagnitudeSource::User && !doc.contains("magnitudes"))
        bad("magnitudes", "required when source is user");
    if (doc.contains("period")) {
        if (!doc["period"].is_string()) bad("period", "must be a string");
        else out.request.period = doc["period"].get<std::string>();
    }
    auto count = [&](const char* field, std::size_t lo, std::size_t hi, std::size_t& target) {
        if (!doc.contains(field)) return;
        const auto& v = doc[field];
        if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(lo) || v.get<long long>() > static_cast<long long>(hi))
            bad(field, "must be an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        else target = v.get<std::size_t>();
    };
    count("horizon", 0, options.max_horizon, out.request.horizon);
    if (with_bootstrap) {
        count("replicates", 2, options.max_replicates, out.replicates);
        if (doc.contains("seed")) {
            if (!doc["seed"].is_number_unsigned()) bad("seed", "must be a non-negative integer");
            else out.seed = doc["seed"].get<std::uint64_t>();
        }
        if (doc.contains("confidence")) {
            const auto& v = doc["confidence"];
            if (!v.is_number() || !(v.get<double>() > 0.0 && v.get<double>() < 1.0)) bad("confidence", "must be a number in (0, 1)");
            else out.confidence = v.get<double>();
        }
        if (doc.contains("recompute_shocks")) {
            if (!doc["recompute_shocks"].is_boolean()) bad("recompute_shocks", "must be true or false");
            else out.recompute_shocks = doc["recompute_shocks"].get<bool>();
        }
    }
    if (!errors.empty()) {
        failure = problem(400, "request.malformed", "the scenario has invalid fields", errors);
        return std::nullopt;
    }
    if (out.request.series.empty()) {
        failure = problem(400, "scenario.empty", "select at least one series to shock",
                          Json::array({Json{{"field", "series"}, {"message", "empty"}}}));
        return std::nullopt;
    }
    return out;
}

}  // namespace

HttpResponse problem(int status, const std::string& code, const std::string& detail, Json field_errors) {
    Json j{{"code", code}, {"status", status}, {"detail", detail}, {"errors", std::move(field_errors)}};
    return {status, j.dump()};
}

ScenarioService::ScenarioService(ModelBundle bundle, ServiceOptions options)
    : bundle_(std::move(bundle)), options_(options) {
    for (const auto& p : bundle_.periods) slices_.emplace(p, panel::slice_period(bundle_.panel, p));
    const auto n = std::max<std::size_t>(1, options_.workers);
    for (std::size_t i = 0; i < n; ++i) workers_.emplace_back([this] { worker(); });
}

ScenarioService::~ScenarioService() {
    stop();
    {
        std::lock_guard lock(mutex_);
        shutting_down_ = true;
    }
    wake_.notify_all();
    for (auto& t : workers_) t.join();
}

void ScenarioService::worker() {
    for (;;) {
        std::function<void()> task;
        {
            std::unique_lock lock(mutex_);
            wake_.wait(lock, [this] { return shutting_down_ || !queue_.empty(); });
            if (shutting_down_) return;
            task = std::move(queue_.front());
            queue_.pop_front();
        }
        task();
    }
}

HttpResponse ScenarioService::handle(std::string_view method, std::string_view path, std::string_view body) {
    try {
        const auto parts = split_path(path);
        if (method == "GET" && parts.size() == 1 && parts[0] == "model") return get_model();
        if (method == "POST" && parts.size() == 1 && parts[0] == "jirf") return post_jirf(body);
        if (method == "POST" && parts.size() == 2 && parts[0] == "jirf" && parts[1] == "bootstrap") return post_bootstrap(body);
        if (method == "GET" && parts.size() == 2 && parts[0] == "jobs") return get_job(parts[1]);
        if (method == "GET" && parts.size() == 3 && parts[0] == "grids") return get_grid(parts[1], parts[2]);
        return problem(404, "route.not_found", std::string(method) + " " + std::string(path) + " is not an endpoint");
    } catch (const Error& e) {
        return from_error(e);
    } catch (const std::exception& e) {
        return problem(500, "internal", e.what());
    }
}

HttpResponse ScenarioService::get_model() const {
    const auto& p = bundle_.panel;
    Json j;
    j["dim"] = p.cols();
    j["series"] = p.labels();
    j["commodities"] = p.commodity_order;
    j["regions"] = p.region_order;
    j["default_period"] = bundle_.default_period;
    Json periods = Json::array();
    for (const auto& per : p.periods)
        periods.push_back(Json{{"name", per.name}, {"first", panel::format_date(p.stamps[per.begin])},
                               {"last", panel::format_date(p.stamps[per.end - 1])}, {"weeks", per.size()}});
    j["periods"] = periods;
    Json fits = Json::object();
    for (const auto& [name, fit] : bundle_.fits) {
        std::vector<std::string> grids{"Pi"};
        for (std::size_t k = 1; k < fit.lags; ++k) grids.push_back("Gamma" + std::to_string(k));
        fits[name] = Json{{"lags", fit.lags}, {"lambda", fit.lambda}, {"gamma", fit.gamma},
                          {"spectral_radius", varnet::spectral_radius(fit)}, {"grids", grids}};
    }
    j["fits"] = fits;
    return {200, j.dump()};
}

HttpResponse ScenarioService::post_jirf(std::string_view body) const {
    HttpResponse failure;
    const auto parsed = parse_scenario(body, bundle_, options_, false, failure);
    if (!parsed) return failure;
    const auto& fit = bundle_.fit(parsed->request.period);
    const auto& slice = slices_.at(parsed->request.period);
    const auto shock = jirf::build_shock(parsed->request, fit.series, &slice, &fit);
    const auto vma = jirf::to_vma(fit, shock.horizon);
    return {200, jirf::compute_jirf(vma, fit.sigma, shock).to_json()};
}

HttpResponse ScenarioService::post_bootstrap(std::string_view body) {
    HttpResponse failure;
    const auto parsed = parse_scenario(body, bundle_, options_, true, failure);
    if (!parsed) return failure;
    const auto& fit = bundle_.fit(parsed->request.period);
    const auto& slice = slices_.at(parsed->request.period);
    // Resolve the scenario now so bad requests fail synchronously.
    auto shock = jirf::build_shock(parsed->request, fit.series, &slice, &fit);
    auto point = jirf::compute_jirf(jirf::to_vma(fit, shock.horizon), fit.sigma, shock);

    bootstrap::BootstrapSpec spec;
    spec.replicates = parsed->replicates;
    spec.seed = parsed->seed;
    spec.confidence = parsed->confidence;
    spec.recompute_shocks = parsed->recompute_shocks;
    spec.threads = 1;
    spec.validate();

    std::string id;
    {
        std::lock_guard lock(mutex_);
        if (pending_ >= options_.max_pending)
            return problem(429, "job.queue_full", "too many bootstrap jobs pending; retry later");
        id = "job-" + std::to_string(next_id_++);
        jobs_[id] = Job{};
        ++pending_;
        queue_.push_back([this, id, &fit, &slice, shock = std::move(shock), point = std::move(point), spec] {
            {
                std::lock_guard l(mutex_);
                jobs_[id].status = "running";
            }
            Job done;
            try {
                const auto dist = bootstrap::bootstrap_jirf(fit, slice, shock, spec);
                done.result = bootstrap::with_bands(point, dist).to_json();
                done.status = "done";
            } catch (const Error& e) {
                done.status = "failed";
                done.error = Json{{"code", e.code()}, {"detail", e.what()}};
            } catch (const std::exception& e) {
                done.status = "failed";
                done.error = Json{{"code", "internal"}, {"detail", e.what()}};
            }
            std::lock_guard l(mutex_);
            jobs_[id] = std::move(done);
            --pending_;
        });
    }
    wake_.notify_one();
    return {202, Json{{"id", id}, {"status", "queued"}, {"href", "/jobs/" + id}}.dump()};
}

HttpResponse ScenarioService::get_job(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) return problem(404, "job.not_found", "no job with id '" + id + "'");
    const auto& job = it->second;
    // The result is spliced in verbatim so its numbers match a direct library call byte for byte.
    std::string out = "{\"id\":" + Json(id).dump() + ",\"status\":" + Json(job.status).dump();
    if (job.status == "done") out += ",\"result\":" + job.result;
    if (job.status == "failed") out += ",\"error\":" + job.error.dump();
    return {200, out + "}"};
}

HttpResponse ScenarioService::get_grid(const std::string& period, const std::string& matrix) const {
    const auto& fit = bundle_.fit(period);
    return {200, export_grid(vecm::to_vecm(fit), matrix, period, bundle_.commodities).to_json().dump()};
}

int ScenarioService::bind(const std::string& host, int port, const std::filesystem::path& ui_dir) {
    server_ = std::make_unique<httplib::Server>();
    if (!ui_dir.empty() && !server_->set_mount_point("/ui", ui_dir.string()))
        throw Error("service.ui_missing", "cannot serve UI bundle from " + ui_dir.string());
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
        const auto r = handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body, r.status >= 400 ? "application/problem+json" : "application/json");
    };
    server_->Get(".*", forward);
    server_->Post(".*", forward);
    const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("service.bind", "cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void ScenarioService::run() {
    if (!server_) throw Error("service.not_bound", "bind() must be called before run()");
    server_->listen_after_bind();
}

void ScenarioService::stop() {
    if (server_) server_->stop();
}

}  // namespace svecm::app
