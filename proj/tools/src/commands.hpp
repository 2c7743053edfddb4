#pragma once

#include <ostream>

#include "run_config.hpp"
#include "voxelpaint/error.hpp"

namespace voxelpaint::cli {

void cmd_prepare(const RunConfig& config, std::ostream& log);
void cmd_train(const RunConfig& config, std::ostream& log);
void cmd_infer(const RunConfig& config, std::ostream& log);
void cmd_evaluate(const RunConfig& config, std::ostream& log);
/// Prints the table to out and writes it to <workdir>/report/report.txt.
void cmd_report(const RunConfig& config, std::ostream& out, std::ostream& log);

/// Writes the resolved config as <dir>/resolved_config.json.
void write_resolved_config(const RunConfig& config, const std::filesystem::path& dir);

/// File name of an inpainted scan.
std::string inference_filename(const std::string& case_id);

/// 0 success, 2 missing input, 3 invalid config or data, 4 numeric failure.
int exit_code_for(ErrorCode code);

}  // namespace voxelpaint::cli
