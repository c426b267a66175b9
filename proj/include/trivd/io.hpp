#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "trivd/assignment.hpp"
#include "trivd/harness.hpp"
#include "trivd/mot_metrics.hpp"
#include "trivd/tensor.hpp"
#include "trivd/tracker.hpp"
#include "trivd/video_features.hpp"

namespace trivd {

using Json = nlohmann::json;

inline constexpr const char* kScenarioSchema = "trivd-scenario/1";

// Conversions found by nlohmann::json through ADL. Readers validate and throw
// ValidationError on malformed input.

void to_json(Json& j, const Tensor& t);
void from_json(const Json& j, Tensor& t);

Json feature_map_to_json(const FeatureMap& m);
FeatureMap feature_map_from_json(const Json& j);

void to_json(Json& j, const Box& b);  // [x0, y0, x1, y1]
void from_json(const Json& j, Box& b);

void to_json(Json& j, const TextPrompt& p);
TextPrompt prompt_from_json(const Json& j);

void to_json(Json& j, const TokenSpanDistribution& d);
TokenSpanDistribution distribution_from_json(const Json& j);

Json matrix_to_json(const Eigen::MatrixXd& m);  // list of rows
Eigen::MatrixXd matrix_from_json(const Json& j);

void to_json(Json& j, const AssignmentResult& a);
void from_json(const Json& j, AssignmentResult& a);

void to_json(Json& j, const MetricsReport& r);
void from_json(const Json& j, MetricsReport& r);

void to_json(Json& j, const TrackerConfig& c);
void from_json(const Json& j, TrackerConfig& c);

void to_json(Json& j, const ScenarioConfig& c);
void from_json(const Json& j, ScenarioConfig& c);

void to_json(Json& j, const TrajectorySet& s);
void from_json(const Json& j, TrajectorySet& s);

Json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const Json& j);

/// One `frame,id,x,y,w,h,score,category` row per observation, no header.
void write_tracks_csv(std::ostream& out, const TrajectorySet& tracks);

/// Accepts blank lines, surrounding whitespace and an optional header row.
TrajectorySet read_tracks_csv(std::istream& in);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace trivd
