#include "trajrec/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "trajrec/rotation.hpp"

namespace trajrec {

using json = nlohmann::ordered_json;

namespace {

json vec_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json quat_to_json(const Mat3& r) {
  const Quat q = matrix_to_quat(r);
  return json::array({q.w, q.x, q.y, q.z});
}

Mat3 quat_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("expected wxyz quaternion");
  return quat_to_matrix(Quat{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                             j[3].get<double>()});
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return j;
}

constexpr double kDeg = M_PI / 180.0;

}  // namespace

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

void Config::validate() const {
  if (max_iters < 0) throw std::invalid_argument("config: max_iters must be >= 0");
  if (n_spline != 0 && n_spline < 2) throw std::invalid_argument("config: n_spline must be >= 2");
  if (phase1_anchor_iters < 0 || phase1_frame_iters < 0)
    throw std::invalid_argument("config: phase-1 iteration counts must be >= 0");
  if (sigma <= 0.0) throw std::invalid_argument("config: sigma must be > 0");
  if (fps <= 0.0) throw std::invalid_argument("config: fps must be > 0");
  if (adam.alpha <= 0.0 || adam.eps <= 0.0) throw std::invalid_argument("config: bad adam params");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw std::invalid_argument("config: adam betas must be in [0, 1)");
  weights.validate();
  physics.validate();
  camera.validate();
}

Config load_config(const std::string& path) {
  const json j = load_json_file(path);
  Config c;
  c.max_iters = j.value("max_iters", c.max_iters);
  c.seed = j.value("seed", c.seed);
  c.n_spline = j.value("n_spline", c.n_spline);
  c.phase1_anchor_iters = j.value("phase1_anchor_iters", c.phase1_anchor_iters);
  c.phase1_frame_iters = j.value("phase1_frame_iters", c.phase1_frame_iters);
  c.sigma = j.value("sigma", c.sigma);
  c.fps = j.value("fps", c.fps);
  if (j.contains("adam")) {
    const json& a = j["adam"];
    c.adam.alpha = a.value("alpha", c.adam.alpha);
    c.adam.beta1 = a.value("beta1", c.adam.beta1);
    c.adam.beta2 = a.value("beta2", c.adam.beta2);
    c.adam.eps = a.value("eps", c.adam.eps);
  }
  if (j.contains("weights")) {
    const json& w = j["weights"];
    c.weights.per_hand = w.value("per_hand", c.weights.per_hand);
    c.weights.per_obj = w.value("per_obj", c.weights.per_obj);
    c.weights.per_static = w.value("per_static", c.weights.per_static);
    c.weights.reg_obj = w.value("reg_obj", c.weights.reg_obj);
    c.weights.reg_hand = w.value("reg_hand", c.weights.reg_hand);
    c.weights.contact = w.value("contact", c.weights.contact);
    c.weights.decoupled_velocity_reg =
        w.value("decoupled_velocity_reg", c.weights.decoupled_velocity_reg);
  }
  if (j.contains("physics")) {
    const json& p = j["physics"];
    if (p.contains("gravity")) c.physics.gravity = vec_from_json(p["gravity"]);
    c.physics.k_p = p.value("k_p", c.physics.k_p);
    c.physics.k_v = p.value("k_v", c.physics.k_v);
    c.physics.mu = p.value("mu", c.physics.mu);
    c.physics.k_jv = p.value("k_jv", c.physics.k_jv);
    c.physics.k_jw = p.value("k_jw", c.physics.k_jw);
    c.physics.n_boundary_points = p.value("n_boundary_points", c.physics.n_boundary_points);
    c.physics.max_step = p.value("max_step", c.physics.max_step);
  }
  if (j.contains("camera")) {
    const json& cam = j["camera"];
    c.camera.height = cam.value("height", c.camera.height);
    if (cam.contains("elevation_deg")) c.camera.elevation = cam["elevation_deg"].get<double>() * kDeg;
    if (cam.contains("fov_deg")) c.camera.fov = cam["fov_deg"].get<double>() * kDeg;
    c.camera.image_w = cam.value("image_w", c.camera.image_w);
    c.camera.image_h = cam.value("image_h", c.camera.image_h);
  }
  c.validate();
  return c;
}

void save_config(const Config& c, const std::string& path) {
  json j;
  j["max_iters"] = c.max_iters;
  j["seed"] = c.seed;
  j["n_spline"] = c.n_spline;
  j["phase1_anchor_iters"] = c.phase1_anchor_iters;
  j["phase1_frame_iters"] = c.phase1_frame_iters;
  j["sigma"] = c.sigma;
  j["fps"] = c.fps;
  j["adam"] = {{"alpha", c.adam.alpha},
               {"beta1", c.adam.beta1},
               {"beta2", c.adam.beta2},
               {"eps", c.adam.eps}};
  j["weights"] = {{"per_hand", c.weights.per_hand},
                  {"per_obj", c.weights.per_obj},
                  {"per_static", c.weights.per_static},
                  {"reg_obj", c.weights.reg_obj},
                  {"reg_hand", c.weights.reg_hand},
                  {"contact", c.weights.contact},
                  {"decoupled_velocity_reg", c.weights.decoupled_velocity_reg}};
  j["physics"] = {{"gravity", vec_to_json(c.physics.gravity)},
                  {"k_p", c.physics.k_p},
                  {"k_v", c.physics.k_v},
                  {"mu", c.physics.mu},
                  {"k_jv", c.physics.k_jv},
                  {"k_jw", c.physics.k_jw},
                  {"n_boundary_points", c.physics.n_boundary_points},
                  {"max_step", c.physics.max_step}};
  j["camera"] = {{"height", c.camera.height},
                 {"elevation_deg", c.camera.elevation / kDeg},
                 {"fov_deg", c.camera.fov / kDeg},
                 {"image_w", c.camera.image_w},
                 {"image_h", c.camera.image_h}};
  write_text_file(path, j.dump(2) + "\n");
}

void write_pgm(const Mask& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P5\n" << m.width << " " << m.height << "\n255\n";
  std::vector<unsigned char> row(m.width);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const double v = std::min(1.0, std::max(0.0, m.at(x, y)));
      row[x] = static_cast<unsigned char>(v * 255.0 + 0.5);
    }
    out.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Mask read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw std::runtime_error(path + ": not a P5 graymap");
  int w = 0, h = 0, maxval = 0;
  // Skip whitespace and '#' comment lines between header tokens.
  auto next_int = [&](int& v) {
    while (true) {
      const int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    if (!(in >> v)) throw std::runtime_error(path + ": bad PGM header");
  };
  next_int(w);
  next_int(h);
  next_int(maxval);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    throw std::runtime_error(path + ": unsupported PGM header");
  in.get();  // single whitespace after maxval
  Mask m(w, h);
  std::vector<unsigned char> row(w);
  for (int y = 0; y < h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), row.size());
    if (!in) throw std::runtime_error(path + ": truncated pixel data");
    for (int x = 0; x < w; ++x) m.at(x, y) = static_cast<double>(row[x]) / maxval;
  }
  return m;
}

void write_contact(const ContactSignal& c, const std::string& path) {
  std::ostringstream os;
  for (int t : c.tau) os << (t ? 1 : 0) << "\n";
  write_text_file(path, os.str());
}

ContactSignal read_contact(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  ContactSignal c;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line == "0")
      c.tau.push_back(0);
    else if (line == "1")
      c.tau.push_back(1);
    else
      throw std::runtime_error(path + ": contact lines must be 0 or 1");
  }
  if (c.tau.empty()) throw std::runtime_error(path + ": empty contact signal");
  return c;
}

void save_trajectory(const TrajectoryExport& e, const std::string& path) {
  const Trajectory& t = e.trajectory;
  if (t.times.size() != t.samples.size())
    throw std::invalid_argument("save_trajectory: times/samples length mismatch");
  json j;
  j["camera"] = {{"height", e.camera.height},
                 {"elevation_deg", e.camera.elevation / kDeg},
                 {"fov_deg", e.camera.fov / kDeg},
                 {"image_w", e.camera.image_w},
                 {"image_h", e.camera.image_h}};
  j["hand"] = {{"length", t.hand.length}, {"radius", t.hand.radius}};
  const SceneState& s0 = t.samples.empty() ? SceneState{} : t.samples.front();
  j["object_size"] = vec_to_json(s0.obj_size);
  j["static"] = {{"present", s0.has_static},
                 {"pos", vec_to_json(s0.static_pos)},
                 {"yaw", s0.static_yaw},
                 {"size", vec_to_json(s0.static_size)}};
  json events = json::array();
  for (const EventRecord& ev : t.events)
    events.push_back({{"t", ev.time}, {"kind", to_string(ev.kind)}});
  j["events"] = std::move(events);
  json samples = json::array();
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    const SceneState& s = t.samples[i];
    samples.push_back({{"t", t.times[i]},
                       {"hand_pos", vec_to_json(s.hand_pos)},
                       {"hand_quat", quat_to_json(s.hand_rot)},
                       {"grasp_signal", s.grasp_signal},
                       {"obj_pos", vec_to_json(s.obj_pos)},
                       {"obj_quat", quat_to_json(s.obj_rot)},
                       {"obj_lin_vel", vec_to_json(s.obj_lin_vel)},
                       {"obj_ang_vel", vec_to_json(s.obj_ang_vel)},
                       {"grasped", s.grasped}});
  }
  j["samples"] = std::move(samples);
  json hist = json::array();
  for (const LossHistoryEntry& h : e.history)
    hist.push_back({{"iter", h.iteration},
                    {"per", h.terms.perceptual},
                    {"reg", h.terms.regularization},
                    {"con", h.terms.contact},
                    {"total", h.terms.total()}});
  j["history"] = std::move(hist);
  write_text_file(path, j.dump(2) + "\n");
}

TrajectoryExport load_trajectory(const std::string& path) {
  const json j = load_json_file(path);
  TrajectoryExport e;
  try {
    const json& cam = j.at("camera");
    e.camera.height = cam.at("height").get<double>();
    e.camera.elevation = cam.at("elevation_deg").get<double>() * kDeg;
    e.camera.fov = cam.at("fov_deg").get<double>() * kDeg;
    e.camera.image_w = cam.at("image_w").get<int>();
    e.camera.image_h = cam.at("image_h").get<int>();

    Trajectory& t = e.trajectory;
    t.hand.length = j.at("hand").at("length").get<double>();
    t.hand.radius = j.at("hand").at("radius").get<double>();
    const Vec3 obj_size = vec_from_json(j.at("object_size"));
    const json& st = j.at("static");
    const bool has_static = st.at("present").get<bool>();
    const Vec3 static_pos = vec_from_json(st.at("pos"));
    const double static_yaw = st.at("yaw").get<double>();
    const Vec3 static_size = vec_from_json(st.at("size"));

    for (const json& ev : j.at("events")) {
      EventRecord rec;
      rec.time = ev.at("t").get<double>();
      const std::string kind = ev.at("kind").get<std::string>();
      if (kind == "grasp")
        rec.kind = EventRecord::Kind::Grasp;
      else if (kind == "release")
        rec.kind = EventRecord::Kind::Release;
      else
        throw std::invalid_argument("unknown event kind: " + kind);
      t.events.push_back(rec);
    }
    for (const json& sj : j.at("samples")) {
      t.times.push_back(sj.at("t").get<double>());
      SceneState s;
      s.hand_pos = vec_from_json(sj.at("hand_pos"));
      s.hand_rot = quat_from_json(sj.at("hand_quat"));
      s.grasp_signal = sj.at("grasp_signal").get<double>();
      s.obj_pos = vec_from_json(sj.at("obj_pos"));
      s.obj_rot = quat_from_json(sj.at("obj_quat"));
      s.obj_lin_vel = vec_from_json(sj.at("obj_lin_vel"));
      s.obj_ang_vel = vec_from_json(sj.at("obj_ang_vel"));
      s.obj_size = obj_size;
      s.has_static = has_static;
      s.static_pos = static_pos;
      s.static_yaw = static_yaw;
      s.static_size = static_size;
      s.grasped = sj.at("grasped").get<bool>();
      t.samples.push_back(s);
    }
    if (j.contains("history"))
      for (const json& hj : j.at("history")) {
        LossHistoryEntry h;
        h.iteration = hj.at("iter").get<int>();
        h.terms.perceptual = hj.at("per").get<double>();
        h.terms.regularization = hj.at("reg").get<double>();
        h.terms.contact = hj.at("con").get<double>();
        e.history.push_back(h);
      }
  } catch (const json::exception& ex) {
    throw std::runtime_error(path + ": " + ex.what());
  }
  return e;
}

void export_waypoints(const Trajectory& traj, const std::string& path) {
  std::ostringstream os;
  os << "# t x y z qw qx qy qz  (gripper pose per sample; GRASP/RELEASE t at events)\n";
  std::size_t next_event = 0;
  char buf[256];
  auto emit_events_until = [&](double t) {
    while (next_event < traj.events.size() && traj.events[next_event].time <= t) {
      const EventRecord& ev = traj.events[next_event++];
      std::snprintf(buf, sizeof(buf), "%s %.6f\n",
                    ev.kind == EventRecord::Kind::Grasp ? "GRASP" : "RELEASE", ev.time);
      os << buf;
    }
  };
  for (std::size_t i = 0; i < traj.samples.size(); ++i) {
    emit_events_until(traj.times[i]);
    const SceneState& s = traj.samples[i];
    const Quat q = matrix_to_quat(s.hand_rot);
    std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f\n", traj.times[i],
                  s.hand_pos.x, s.hand_pos.y, s.hand_pos.z, q.w, q.x, q.y, q.z);
    os << buf;
  }
  emit_events_until(std::numeric_limits<double>::infinity());
  write_text_file(path, os.str());
}

}  // namespace trajrec
