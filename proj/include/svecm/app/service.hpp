#pragma once

#include "svecm/app/pipeline.hpp"
#include "svecm/app/serialize.hpp"

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace svecm::app {

struct ServiceOptions {
    /// Bootstrap workers; each job runs its replicates on one thread.
    std::size_t workers = 2;
    /// Queued plus running jobs beyond this are refused with job.queue_full.
    std::size_t max_pending = 16;
    std::size_t max_replicates = 5000;
    std::size_t max_horizon = 200;
};

struct HttpResponse {
    int status = 200;
    std::string body;
};

/// Problem document {"code", "status", "detail", "errors"}.
HttpResponse problem(int status, const std::string& code, const std::string& detail, Json field_errors = Json::array());

/**
 * What-if scenario service over an immutable model bundle.
 *
 * handle() is the whole API and is safe to call from many threads; the HTTP
 * layer only forwards to it. Point JIRF bodies are exactly
 * JirfResult::to_json() of the equivalent library call.
 */
class ScenarioService {
public:
    explicit ScenarioService(ModelBundle bundle, ServiceOptions options = {});
    ~ScenarioService();
    ScenarioService(const ScenarioService&) = delete;
    ScenarioService& operator=(const ScenarioService&) = delete;

    HttpResponse handle(std::string_view method, std::string_view path, std::string_view body);

    /// Binds the HTTP listener; port 0 picks a free one. Returns the bound port.
    int bind(const std::string& host, int port, const std::filesystem::path& ui_dir = {});
    /// Serves until stop(); call after bind().
    void run();
    void stop();

    [[nodiscard]] const ModelBundle& bundle() const { return bundle_; }

private:
    struct Job {
        std::string status = "queued";
        std::string result;
        Json error;
    };

    HttpResponse get_model() const;
    HttpResponse post_jirf(std::string_view body) const;
    HttpResponse post_bootstrap(std::string_view body);
    HttpResponse get_job(const std::string& id) const;
    HttpResponse get_grid(const std::string& period, const std::string& matrix) const;
    void worker();

    ModelBundle bundle_;
    ServiceOptions options_;
    std::map<std::string, panel::PricePanel> slices_;

    mutable std::mutex mutex_;
    std::condition_variable wake_;
    std::deque<std::function<void()>> queue_;
    std::map<std::string, Job> jobs_;
    std::size_t pending_ = 0;
    std::size_t next_id_ = 1;
    bool shutting_down_ = false;
    std::vector<std::thread> workers_;

    std::unique_ptr<httplib::Server> server_;
};

}  // namespace svecm::app
