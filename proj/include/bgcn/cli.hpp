#pragma once

#include "bgcn/pipeline.hpp"
#include "bgcn/plot.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace bgcn {

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_data = 2, exit_divergence = 3 };

// Entry point of the `bgcn` tool. Output goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Preparation record: bandwidth, threshold, dropped steps, splits,
// normalization statistics, seed and node order.
nlohmann::json manifest_json(const PreparedData& prepared, const ExperimentConfig& config);
// alpha, beta, iterations, final objective, convergence.
nlohmann::json map_graph_json(const MapGraph& map, const MapGraphConfig& config);

// Plot numbers for a trained model on prepared data: graphs, test metrics
// and one-step-ahead traces of the first `trace_nodes` nodes over the first
// `trace_steps` test windows.
PlotInputs collect_plot_inputs(const ForecastModel& model, const PreparedData& prepared,
                               const ExperimentConfig& config, Index trace_nodes = 3, Index trace_steps = 288);

}  // namespace bgcn
