#pragma once

#include "svecm/app/config.hpp"
#include "svecm/app/serialize.hpp"
#include "svecm/error.hpp"
#include "svecm/panel.hpp"
#include "svecm/varnet.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace svecm::app {

/// Stage names in execution order. `ingest` always runs first and is not counted as a stage.
const std::vector<std::string>& pipeline_stages();

/// Stage failure; code is "pipeline.<stage>", the original error is kept.
class PipelineError : public Error {
public:
    PipelineError(std::string stage, const Error& cause);
    PipelineError(std::string stage, const std::exception& cause);

    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }
    [[nodiscard]] const std::string& cause_code() const noexcept { return cause_code_; }

private:
    std::string stage_;
    std::string cause_code_;
};

struct PipelineResult {
    std::filesystem::path output;
    std::string manifest_text;
    /// SHA-256 of manifest.json.
    std::string manifest_hash;
    std::vector<std::string> stages_run;
};

/**
 * Runs ingest and then the analysis stages up to and including `until`
 * (empty: all of them). Artifacts land under config.output; the manifest
 * records the config echo, input hashes and per-stage artifact hashes and
 * carries no timestamps, so identical inputs give identical bytes.
 *
 * On failure manifest.partial.json and a `.partial` marker are written and a
 * PipelineError is thrown.
 */
PipelineResult run_pipeline(const PipelineConfig& config, const std::string& until = "");

/// What the pipeline leaves on disk for the service, read back.
struct ModelBundle {
    std::filesystem::path dir;
    /// Log-scale interpolated panel with period tags.
    panel::PricePanel panel;
    std::map<std::string, varnet::VarFit> fits;
    std::vector<std::string> periods;
    std::string default_period;
    std::vector<std::string> commodities;

    [[nodiscard]] const varnet::VarFit& fit(const std::string& period) const;
};

ModelBundle load_bundle(const std::filesystem::path& dir);

}  // namespace svecm::app
