#include "trivd/io.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace trivd {

namespace {

template <typename T>
T get(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw ValidationError(std::string("missing JSON field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad JSON field '") + key + "': " + e.what());
  }
}

template <typename T>
void get_opt(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad JSON field '") + key + "': " + e.what());
  }
}

void reject_unknown(const Json& j, const std::set<std::string>& known,
                    const std::string& what) {
  if (!j.is_object()) throw ValidationError(what + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) {
      throw ValidationError(what + ": unknown field '" + key + "'");
    }
  }
}

Json vector_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const Json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
}

}  // namespace

void to_json(Json& j, const Tensor& t) {
  j = Json{{"shape", t.shape()},
           {"data", std::vector<double>(t.data().data(),
                                        t.data().data() + t.data().size())}};
}

void from_json(const Json& j, Tensor& t) {
  t = Tensor(get<Shape>(j, "shape"), get<std::vector<double>>(j, "data"));
}

Json feature_map_to_json(const FeatureMap& m) {
  return Json{{"levels", m.levels()}};
}

FeatureMap feature_map_from_json(const Json& j) {
  std::vector<Tensor> levels;
  for (const auto& l : get<Json>(j, "levels")) levels.push_back(l.get<Tensor>());
  return FeatureMap(std::move(levels));
}

void to_json(Json& j, const Box& b) { j = b.coords(); }

void from_json(const Json& j, Box& b) {
  if (!j.is_array() || j.size() != 4) {
    throw ValidationError("box must be an array [x0, y0, x1, y1]");
  }
  b = Box::from_coords(j.get<std::array<double, 4>>());
}

void to_json(Json& j, const TextPrompt& p) {
  Json spans = Json::array();
  for (const auto& s : p.spans()) spans.push_back({s.start, s.end});
  j = Json{{"categories", p.categories()},
           {"spans", spans},
           {"token_count", p.token_count()}};
}

TextPrompt prompt_from_json(const Json& j) {
  const auto categories = get<std::vector<std::string>>(j, "categories");
  std::vector<TokenSpan> spans;
  std::size_t end = 0;
  for (const auto& s : get<Json>(j, "spans")) {
    const auto pair = s.get<std::array<std::size_t, 2>>();
    spans.push_back({pair[0], pair[1]});
    end = std::max(end, pair[1]);
  }
  std::size_t token_count = end;
  get_opt(j, "token_count", token_count);
  return TextPrompt(categories, spans, token_count);
}

void to_json(Json& j, const TokenSpanDistribution& d) { j = vector_to_json(d.probs()); }

TokenSpanDistribution distribution_from_json(const Json& j) {
  return TokenSpanDistribution(vector_from_json(j));
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows.push_back(vector_to_json(m.row(i).transpose()));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) {
      throw ValidationError("matrix rows have different lengths");
    }
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  return m;
}

void to_json(Json& j, const AssignmentResult& a) {
  Json pairs = Json::array();
  for (const auto& p : a.pairs) pairs.push_back({p.gt, p.pred, p.cost});
  j = Json{{"mode", a.mode == MatchMode::tracking ? "tracking" : "detection"},
           {"pairs", pairs},
           {"unmatched_preds", a.unmatched_preds},
           {"unmatched_gts", a.unmatched_gts},
           {"total_cost", a.total_cost}};
}

void from_json(const Json& j, AssignmentResult& a) {
  const auto mode = get<std::string>(j, "mode");
  if (mode != "tracking" && mode != "detection") {
    throw ValidationError("unknown match mode '" + mode + "'");
  }
  a.mode = mode == "tracking" ? MatchMode::tracking : MatchMode::detection;
  a.pairs.clear();
  for (const auto& p : get<Json>(j, "pairs")) {
    a.pairs.push_back({p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>(),
                       p.at(2).get<double>()});
  }
  a.unmatched_preds = get<std::vector<std::size_t>>(j, "unmatched_preds");
  a.unmatched_gts = get<std::vector<std::size_t>>(j, "unmatched_gts");
  a.total_cost = get<double>(j, "total_cost");
}

void to_json(Json& j, const MetricsReport& r) {
  j = Json{{"mota", r.mota}, {"idf1", r.idf1}, {"mt", r.mt},   {"ml", r.ml},
           {"fp", r.fp},     {"fn", r.fn},     {"ids", r.ids}, {"n_gt", r.n_gt}};
  j["ap"] = r.ap ? Json(*r.ap) : Json(nullptr);
}

void from_json(const Json& j, MetricsReport& r) {
  r.mota = get<double>(j, "mota");
  r.idf1 = get<double>(j, "idf1");
  r.mt = get<std::size_t>(j, "mt");
  r.ml = get<std::size_t>(j, "ml");
  r.fp = get<std::size_t>(j, "fp");
  r.fn = get<std::size_t>(j, "fn");
  r.ids = get<std::size_t>(j, "ids");
  r.n_gt = get<std::size_t>(j, "n_gt");
  r.ap.reset();
  if (j.contains("ap") && !j.at("ap").is_null()) r.ap = j.at("ap").get<double>();
}

void to_json(Json& j, const TrackerConfig& c) {
  j = Json{{"sigma_track", c.sigma_track}, {"sigma_nms", c.sigma_nms},
           {"n_reid", c.n_reid},           {"sigma_reid", c.sigma_reid},
           {"init_iou", c.init_iou},       {"n_box", c.n_box},
           {"min_similarity", c.min_similarity}};
}

void from_json(const Json& j, TrackerConfig& c) {
  reject_unknown(j,
                 {"sigma_track", "sigma_nms", "n_reid", "sigma_reid", "init_iou",
                  "n_box", "min_similarity"},
                 "tracker config");
  c = TrackerConfig{};
  get_opt(j, "sigma_track", c.sigma_track);
  get_opt(j, "sigma_nms", c.sigma_nms);
  get_opt(j, "n_reid", c.n_reid);
  get_opt(j, "sigma_reid", c.sigma_reid);
  get_opt(j, "init_iou", c.init_iou);
  get_opt(j, "n_box", c.n_box);
  get_opt(j, "min_similarity", c.min_similarity);
  c.validate();
}

void to_json(Json& j, const ScenarioConfig& c) {
  Json occ = Json::array();
  for (const auto& w : c.occlusions) occ.push_back({w.object, w.first, w.last});
  j = Json{{"seed", c.seed},
           {"frames", c.frames},
           {"categories", c.categories},
           {"objects_per_category", c.objects_per_category},
           {"image_size", {c.image_width, c.image_height}},
           {"max_speed", c.max_speed},
           {"box_size", {c.min_box, c.max_box}},
           {"box_jitter", c.box_jitter},
           {"score_noise", c.score_noise},
           {"drop_prob", c.drop_prob},
           {"fp_rate", c.fp_rate},
           {"embed_noise", c.embed_noise},
           {"embed_dim", c.embed_dim},
           {"occlusions", occ},
           {"clip_len", c.clip_len},
           {"track_queries", c.track_queries}};
}

void from_json(const Json& j, ScenarioConfig& c) {
  reject_unknown(j,
                 {"seed", "frames", "categories", "objects_per_category",
                  "image_size", "max_speed", "box_size", "box_jitter",
                  "score_noise", "drop_prob", "fp_rate", "embed_noise",
                  "embed_dim", "occlusions", "clip_len", "track_queries"},
                 "scenario config");
  c = ScenarioConfig{};
  get_opt(j, "seed", c.seed);
  get_opt(j, "frames", c.frames);
  get_opt(j, "categories", c.categories);
  get_opt(j, "objects_per_category", c.objects_per_category);
  if (j.contains("image_size")) {
    const auto size = get<std::array<double, 2>>(j, "image_size");
    c.image_width = size[0];
    c.image_height = size[1];
  }
  get_opt(j, "max_speed", c.max_speed);
  if (j.contains("box_size")) {
    const auto size = get<std::array<double, 2>>(j, "box_size");
    c.min_box = size[0];
    c.max_box = size[1];
  }
  get_opt(j, "box_jitter", c.box_jitter);
  get_opt(j, "score_noise", c.score_noise);
  get_opt(j, "drop_prob", c.drop_prob);
  get_opt(j, "fp_rate", c.fp_rate);
  get_opt(j, "embed_noise", c.embed_noise);
  get_opt(j, "embed_dim", c.embed_dim);
  if (j.contains("occlusions")) {
    for (const auto& w : j.at("occlusions")) {
      const auto t = w.get<std::tuple<std::size_t, std::int64_t, std::int64_t>>();
      c.occlusions.push_back({std::get<0>(t), std::get<1>(t), std::get<2>(t)});
    }
  }
  get_opt(j, "clip_len", c.clip_len);
  get_opt(j, "track_queries", c.track_queries);
  c.validate();
}

void to_json(Json& j, const TrajectorySet& s) {
  j = Json::array();
  for (const auto& [id, obs] : s.trajectories()) {
    Json list = Json::array();
    for (const auto& o : obs) {
      list.push_back({{"frame", o.frame},
                      {"box", o.box},
                      {"category", o.category},
                      {"score", o.score}});
    }
    j.push_back({{"id", id}, {"observations", list}});
  }
}

void from_json(const Json& j, TrajectorySet& s) {
  if (!j.is_array()) throw ValidationError("trajectories must be a JSON array");
  s = TrajectorySet{};
  for (const auto& traj : j) {
    const auto id = get<TrackId>(traj, "id");
    for (const auto& o : get<Json>(traj, "observations")) {
      Observation obs{get<std::int64_t>(o, "frame"), get<Box>(o, "box"),
                      get<std::string>(o, "category"), 1.0};
      get_opt(o, "score", obs.score);
      s.add(id, obs);
    }
  }
}

Json scenario_to_json(const Scenario& s) {
  Json frames = Json::array();
  for (std::size_t f = 0; f < s.detections.size(); ++f) {
    Json dets = Json::array();
    for (std::size_t d = 0; d < s.detections[f].size(); ++d) {
      const auto& p = s.detections[f][d];
      dets.push_back({{"box", p.box},
                      {"span_dist", p.span_dist},
                      {"score", p.score},
                      {"track_query", p.origin.is_track_query()
                                          ? Json(p.origin.track_id())
                                          : Json(nullptr)},
                      {"embed", vector_to_json(p.embed)},
                      {"source", s.sources[f][d]}});
    }
    frames.push_back({{"detections", dets}});
  }
  return Json{{"schema", kScenarioSchema},
              {"config", s.config},
              {"prompt", s.prompt},
              {"gt", s.gt},
              {"frames", frames}};
}

Scenario scenario_from_json(const Json& j) {
  const auto schema = get<std::string>(j, "schema");
  if (schema != kScenarioSchema) {
    throw ValidationError("unsupported scenario schema '" + schema + "'");
  }
  Scenario s{get<ScenarioConfig>(j, "config"), prompt_from_json(get<Json>(j, "prompt")),
             get<TrajectorySet>(j, "gt"), {}, {}};
  for (const auto& frame : get<Json>(j, "frames")) {
    std::vector<Prediction> dets;
    std::vector<std::int64_t> sources;
    for (const auto& d : get<Json>(frame, "detections")) {
      Prediction p{get<Box>(d, "box"), distribution_from_json(get<Json>(d, "span_dist")),
                   get<double>(d, "score"), QueryOrigin::empty(), {}};
      if (d.contains("track_query") && !d.at("track_query").is_null()) {
        p.origin = QueryOrigin::track(d.at("track_query").get<TrackId>());
      }
      if (d.contains("embed")) p.embed = vector_from_json(d.at("embed"));
      std::int64_t source = -1;
      get_opt(d, "source", source);
      dets.push_back(std::move(p));
      sources.push_back(source);
    }
    s.detections.push_back(std::move(dets));
    s.sources.push_back(std::move(sources));
  }
  return s;
}

void write_tracks_csv(std::ostream& out, const TrajectorySet& tracks) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  std::vector<std::pair<std::pair<std::int64_t, TrackId>, const Observation*>> rows;
  for (const auto& [id, obs] : tracks.trajectories()) {
    for (const auto& o : obs) rows.push_back({{o.frame, id}, &o});
  }
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [key, o] : rows) {
    out << key.first << ',' << key.second << ',' << o->box.x0 << ',' << o->box.y0
        << ',' << o->box.width() << ',' << o->box.height() << ',' << o->score << ','
        << o->category << '\n';
  }
  out.precision(old_precision);
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

TrajectorySet read_tracks_csv(std::istream& in) {
  std::map<TrackId, std::vector<Observation>> by_id;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (line_no == 1 && !fields.empty() && fields[0] == "frame") continue;
    if (fields.size() != 8) {
      throw ValidationError("tracks CSV line " + std::to_string(line_no) +
                            ": expected 8 fields, got " +
                            std::to_string(fields.size()));
    }
    try {
      const std::int64_t frame = std::stoll(fields[0]);
      const TrackId id = std::stoll(fields[1]);
      const Box box = Box::from_xywh(std::stod(fields[2]), std::stod(fields[3]),
                                     std::stod(fields[4]), std::stod(fields[5]));
      by_id[id].push_back({frame, box, fields[7], std::stod(fields[6])});
    } catch (const std::logic_error& e) {
      throw ValidationError("tracks CSV line " + std::to_string(line_no) + ": " +
                            e.what());
    }
  }
  for (auto& [id, obs] : by_id) {
    std::stable_sort(obs.begin(), obs.end(), [](const auto& a, const auto& b) {
      return a.frame < b.frame;
    });
  }
  return TrajectorySet(std::move(by_id));
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace trivd
