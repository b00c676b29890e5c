#include "scfo/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unistd.h>

#include "scfo/bench.hpp"

namespace scfo {

namespace fs = std::filesystem;

std::string format_real(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

Vector vector_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw ValidationError(what + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError(what + " must be an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Matrix matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw ValidationError(what + " must be an array of rows");
  if (j.empty()) return Matrix(0, 0);
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vector row = vector_from_json(j[r], what);
    if (static_cast<std::size_t>(row.size()) != cols) throw ValidationError(what + " rows have unequal lengths");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

Json to_json(const Vector& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

Json to_json(const Matrix& m) {
  Json j = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(to_json(Vector(m.row(r).transpose())));
  return j;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

namespace {

Json parse_json(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(origin + ": " + e.what());
  }
}

std::string dir_of(const std::string& path) {
  const fs::path p = fs::path(path).parent_path();
  return p.empty() ? "." : p.string();
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  const fs::path p(path);
  return p.is_absolute() ? path : (fs::path(base_dir) / p).string();
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("field '") + key + "': " + e.what());
  }
}

std::vector<Matrix> matrices_from_json(const Json& j, const std::string& what) {
  std::vector<Matrix> out;
  if (!j.is_array()) throw ValidationError(what + " must be an array of matrices");
  for (const auto& m : j) out.push_back(matrix_from_json(m, what));
  return out;
}

NumericalConstraint numerical_by_name(const std::string& name) {
  if (name == "circle_exclusion") return circle_exclusion();
  throw ValidationError("unknown numerical constraint '" + name + "'");
}

}  // namespace

TargetRule parse_target(const Json& j, const std::string& base_dir) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "box_center") return TargetRule::box_center();
    if (s.rfind("file:", 0) == 0) {
      const std::string path = resolve(base_dir, s.substr(5));
      const Json content = parse_json(read_file(path), path);
      if (content.is_array() && !content.empty() && content[0].is_array()) {
        std::vector<Vector> points;
        for (const auto& p : content) points.push_back(vector_from_json(p, "target file entry"));
        return TargetRule::sequence(std::move(points));
      }
      return TargetRule::fixed(vector_from_json(content, "target file"));
    }
    // Also accept a vector literal passed as text, e.g. from the command line.
    return TargetRule::fixed(vector_from_json(parse_json(s, "target"), "target"));
  }
  return TargetRule::fixed(vector_from_json(j, "target"));
}

Json ceilings_to_json(const ParameterCeilings& c) {
  return Json{{"eps_p", to_json(c.eps_p)},
              {"delta_gp", to_json(c.delta_gp)},
              {"eps", to_json(c.eps)},
              {"delta_g", to_json(c.delta_g)},
              {"delta_phi", c.delta_phi}};
}

ParameterCeilings ceilings_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("ceilings must be an object");
  ParameterCeilings c;
  c.eps_p = vector_from_json(j.value("eps_p", Json::array()), "ceilings.eps_p");
  c.delta_gp = j.contains("delta_gp") ? vector_from_json(j["delta_gp"], "ceilings.delta_gp") : c.eps_p;
  c.eps = vector_from_json(j.value("eps", Json::array()), "ceilings.eps");
  c.delta_g = j.contains("delta_g") ? vector_from_json(j["delta_g"], "ceilings.delta_g") : c.eps;
  if (!j.contains("delta_phi")) throw ValidationError("ceilings.delta_phi is required");
  c.delta_phi = j["delta_phi"].get<double>();
  return c;
}

ProblemSpec problem_from_json(const Json& j, const std::string& base_dir, const StdioPlantFactory& stdio) {
  if (!j.is_object()) throw ValidationError("problem file must hold a JSON object");
  const std::string plant = get_or<std::string>(j, "plant", "");
  std::optional<ProblemSpec> base;
  std::shared_ptr<PlantOracle> oracle;

  if (plant.rfind("builtin:", 0) == 0) {
    base = builtin(plant.substr(8));
    oracle = base->oracle;
  } else if (plant != "stdio") {
    throw ValidationError("plant must be \"builtin:<name>\" or \"stdio\"");
  }

  std::optional<Box> box;
  if (j.contains("bounds")) {
    box = Box(vector_from_json(j["bounds"].at("lower"), "bounds.lower"),
              vector_from_json(j["bounds"].at("upper"), "bounds.upper"));
  } else if (base) {
    box = base->box;
  } else {
    throw ValidationError("bounds are required");
  }
  const std::size_t n_u = box->size();
  if (j.contains("n_u") && j["n_u"].get<std::size_t>() != n_u) {
    throw ValidationError("n_u does not match the bounds");
  }

  std::vector<NumericalConstraint> numerical;
  if (j.contains("numerical_constraints")) {
    for (const auto& name : j["numerical_constraints"]) numerical.push_back(numerical_by_name(name.get<std::string>()));
  } else if (base) {
    numerical = base->numerical_constraints;
  }

  std::optional<LipschitzData> lip;
  if (j.contains("lipschitz")) {
    const Json& l = j["lipschitz"];
    const Matrix kappa_p = matrix_from_json(l.value("kappa_p", Json::array()), "lipschitz.kappa_p");
    const auto n_gp = static_cast<Eigen::Index>(kappa_p.rows());
    const Vector gamma = l.contains("gamma") ? vector_from_json(l["gamma"], "lipschitz.gamma")
                                             : Vector::Constant(n_gp, LipschitzData::kDefaultGamma);
    lip = LipschitzData(kappa_p, matrix_from_json(l.value("kappa", Json::array()), "lipschitz.kappa"),
                        matrix_from_json(l.at("M_phi"), "lipschitz.M_phi"),
                        matrices_from_json(l.value("M_g", Json::array()), "lipschitz.M_g"),
                        matrices_from_json(l.value("M_gp", Json::array()), "lipschitz.M_gp"), gamma,
                        get_or<double>(l, "gamma_phi", LipschitzData::kDefaultGamma));
  } else if (base) {
    lip = base->lipschitz;
  } else {
    throw ValidationError("lipschitz data are required");
  }

  if (plant == "stdio") {
    const std::size_t n_gp = get_or<std::size_t>(j, "n_gp", lip->n_gp());
    if (!stdio) throw ValidationError("a stdio plant is not available in this context");
    oracle = stdio(n_u, n_gp);
  }

  Vector u0;
  if (j.contains("u0")) {
    u0 = vector_from_json(j["u0"], "u0");
  } else if (base) {
    u0 = base->u0;
  } else {
    throw ValidationError("u0 is required");
  }

  ProblemSpec spec{get_or<std::string>(j, "name", base ? base->name : std::string("problem")),
                   *box,
                   oracle,
                   std::move(numerical),
                   *lip,
                   u0,
                   base ? base->target : TargetRule::box_center(),
                   base ? base->ceilings : std::nullopt,
                   base ? base->phi_lower : std::nullopt};
  if (j.contains("target")) spec.target = parse_target(j["target"], base_dir);
  if (j.contains("ceilings")) spec.ceilings = ceilings_from_json(j["ceilings"]);
  if (j.contains("phi_lower")) spec.phi_lower = j["phi_lower"].get<double>();
  spec.check_consistency();
  return spec;
}

ProblemSpec load_problem(const std::string& path, const StdioPlantFactory& stdio) {
  return problem_from_json(parse_json(read_file(path), path), dir_of(path), stdio);
}

RunConfig run_config_from_json(const Json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ValidationError("run config must hold a JSON object");
  RunConfig c;
  c.budget = get_or<std::size_t>(j, "budget", c.budget);
  c.max_halvings = get_or<int>(j, "max_halvings", c.max_halvings);
  c.adapt = get_or<bool>(j, "adapt", c.adapt);
  c.fixed_level = get_or<int>(j, "fixed_level", c.fixed_level);
  if (j.contains("ceilings")) c.ceilings = ceilings_from_json(j["ceilings"]);
  if (j.contains("target")) c.target = parse_target(j["target"], base_dir);
  if (j.contains("output")) {
    const Json& o = j["output"];
    if (o.contains("csv")) c.csv_path = resolve(base_dir, o["csv"].get<std::string>());
    if (o.contains("json")) c.json_path = resolve(base_dir, o["json"].get<std::string>());
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(parse_json(read_file(path), path), dir_of(path));
}

std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream os;
  if (traj.records.empty()) return "";
  const auto& first = traj.records.front();
  os << "k";
  for (Eigen::Index i = 0; i < first.u.size(); ++i) os << ",u" << i + 1;
  os << ",phi";
  for (Eigen::Index j = 0; j < first.measurement.g_p.size(); ++j) os << ",g_p" << j + 1;
  for (Eigen::Index j = 0; j < first.g_values.size(); ++j) os << ",g" << j + 1;
  os << ",K,level,status\n";
  for (const auto& r : traj.records) {
    os << r.k;
    for (Eigen::Index i = 0; i < r.u.size(); ++i) os << ',' << format_real(r.u[i]);
    os << ',' << format_real(r.measurement.phi);
    for (Eigen::Index j = 0; j < r.measurement.g_p.size(); ++j) os << ',' << format_real(r.measurement.g_p[j]);
    for (Eigen::Index j = 0; j < r.g_values.size(); ++j) os << ',' << format_real(r.g_values[j]);
    os << ',' << (r.K ? format_real(*r.K) : std::string()) << ',' << r.params_level << ',' << to_string(r.status)
       << '\n';
  }
  return os.str();
}

Json trajectory_to_json(const Trajectory& traj, const std::string& problem_name) {
  Json records = Json::array();
  for (const auto& r : traj.records) {
    Json o{{"k", r.k},
           {"u", to_json(r.u)},
           {"phi", r.measurement.phi},
           {"g_p", to_json(r.measurement.g_p)},
           {"grad_phi", to_json(r.measurement.grad_phi)},
           {"grad_g_p", to_json(r.measurement.grad_g_p)},
           {"g", to_json(r.g_values)},
           {"grad_g", to_json(r.g_gradients)},
           {"level", r.params_level},
           {"status", to_string(r.status)}};
    o["target"] = r.target ? to_json(*r.target) : Json();
    o["projected_target"] = r.projected_target ? to_json(*r.projected_target) : Json();
    o["K"] = r.K ? Json(*r.K) : Json();
    o["gain_floor"] = r.gain_floor ? Json(*r.gain_floor) : Json();
    records.push_back(std::move(o));
  }
  return Json{{"problem", problem_name},
              {"ceilings", ceilings_to_json(traj.ceilings)},
              {"max_halvings", traj.max_halvings},
              {"terminal", traj.terminal ? to_json(*traj.terminal) : Json()},
              {"records", std::move(records)}};
}

Trajectory trajectory_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("records")) throw ValidationError("not a trajectory file");
  Trajectory t;
  t.ceilings = ceilings_from_json(j.at("ceilings"));
  t.max_halvings = j.value("max_halvings", 10);
  if (j.contains("terminal") && !j["terminal"].is_null()) t.terminal = vector_from_json(j["terminal"], "terminal");
  for (const auto& o : j["records"]) {
    IterateRecord r;
    r.k = o.at("k").get<std::size_t>();
    r.u = vector_from_json(o.at("u"), "u");
    r.measurement.phi = o.at("phi").get<double>();
    r.measurement.g_p = vector_from_json(o.at("g_p"), "g_p");
    r.measurement.grad_phi = vector_from_json(o.at("grad_phi"), "grad_phi");
    r.measurement.grad_g_p = matrix_from_json(o.at("grad_g_p"), "grad_g_p");
    if (r.measurement.grad_g_p.rows() == 0) r.measurement.grad_g_p.resize(0, r.u.size());
    r.g_values = vector_from_json(o.at("g"), "g");
    r.g_gradients = matrix_from_json(o.value("grad_g", Json::array()), "grad_g");
    if (r.g_gradients.rows() == 0) r.g_gradients.resize(0, r.u.size());
    r.params_level = o.value("level", 0);
    r.status = parse_step_status(o.value("status", std::string("stepped")));
    if (o.contains("target") && !o["target"].is_null()) r.target = vector_from_json(o["target"], "target");
    if (o.contains("projected_target") && !o["projected_target"].is_null()) {
      r.projected_target = vector_from_json(o["projected_target"], "projected_target");
    }
    if (o.contains("K") && !o["K"].is_null()) r.K = o["K"].get<double>();
    if (o.contains("gain_floor") && !o["gain_floor"].is_null()) r.gain_floor = o["gain_floor"].get<double>();
    t.records.push_back(std::move(r));
  }
  if (t.records.empty()) throw ValidationError("trajectory has no records");
  return t;
}

Json growth_to_json(const GrowthBounds& gb) {
  return Json{{"L_p", to_json(gb.L_p)},
              {"L", to_json(gb.L)},
              {"Q_phi", gb.Q_phi},
              {"Q_g", to_json(gb.Q_g)},
              {"Q_gp", to_json(gb.Q_gp)}};
}

Json certificate_to_json(const FjCertificate& cert) {
  auto idx = [](const std::vector<std::size_t>& v) { return Json(v); };
  Json j{{"point", to_json(cert.point)},
         {"error", cert.error},
         {"normalization", to_string(cert.normalization)},
         {"multipliers", to_json(cert.multipliers)},
         {"active_sets",
          {{"g_p", idx(cert.active_sets.g_p)},
           {"g", idx(cert.active_sets.g)},
           {"lower", idx(cert.active_sets.lower)},
           {"upper", idx(cert.active_sets.upper)}}}};
  j["level"] = cert.level ? Json(*cert.level) : Json();
  return j;
}

void atomic_write(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw ValidationError("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, target);
}

void write_outputs(const Trajectory& traj, const RunConfig& cfg, const std::string& problem_name) {
  if (cfg.csv_path) atomic_write(*cfg.csv_path, trajectory_csv(traj));
  if (cfg.json_path) atomic_write(*cfg.json_path, trajectory_to_json(traj, problem_name).dump(1) + "\n");
}

void StreamChannel::send(const std::string& line) {
  out_ << line << '\n';
  out_.flush();
}

std::optional<std::string> StreamChannel::receive() {
  std::string line;
  while (std::getline(in_, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) return line;
  }
  return std::nullopt;
}

std::string encode_request(std::size_t k, const Vector& u) { return Json{{"k", k}, {"u", to_json(u)}}.dump(); }

std::string encode_response(const Measurement& m) {
  return Json{{"phi", m.phi},
              {"g_p", to_json(m.g_p)},
              {"grad_phi", to_json(m.grad_phi)},
              {"grad_g_p", to_json(m.grad_g_p)}}
      .dump();
}

Measurement decode_response(const std::string& line, std::size_t n_u, std::size_t n_gp) {
  try {
    const Json j = Json::parse(line);
    Measurement m;
    m.phi = j.at("phi").get<double>();
    m.g_p = vector_from_json(j.at("g_p"), "g_p");
    m.grad_phi = vector_from_json(j.at("grad_phi"), "grad_phi");
    m.grad_g_p = matrix_from_json(j.at("grad_g_p"), "grad_g_p");
    if (m.grad_g_p.rows() == 0) m.grad_g_p.resize(0, static_cast<Eigen::Index>(n_u));
    if (static_cast<std::size_t>(m.g_p.size()) != n_gp || static_cast<std::size_t>(m.grad_phi.size()) != n_u ||
        static_cast<std::size_t>(m.grad_g_p.rows()) != n_gp || static_cast<std::size_t>(m.grad_g_p.cols()) != n_u) {
      throw ProtocolError("response shape mismatch (expected n_u = " + std::to_string(n_u) +
                          ", n_gp = " + std::to_string(n_gp) + "): " + line);
    }
    if (!m.finite()) throw ProtocolError("response holds non-finite values: " + line);
    return m;
  } catch (const ProtocolError&) {
    throw;
  } catch (const std::exception& e) {
    throw ProtocolError(std::string("malformed response (") + e.what() + "): " + line);
  }
}

ProtocolPlant::ProtocolPlant(std::shared_ptr<LineChannel> channel, std::size_t n_u, std::size_t n_gp,
                             std::string name)
    : channel_(std::move(channel)), n_u_(n_u), n_gp_(n_gp), name_(std::move(name)) {}

Measurement ProtocolPlant::measure(const Vector& u) {
  channel_->send(encode_request(k_++, u));
  const auto line = channel_->receive();
  if (!line) throw ProtocolError("plant closed the stream before answering request " + std::to_string(k_ - 1));
  return decode_response(*line, n_u_, n_gp_);
}

std::size_t serve_plant(PlantOracle& plant, LineChannel& channel) {
  std::size_t served = 0;
  while (auto line = channel.receive()) {
    Json req;
    try {
      req = Json::parse(*line);
    } catch (const Json::parse_error&) {
      throw ProtocolError("malformed request: " + *line);
    }
    if (!req.contains("u")) throw ProtocolError("request without u: " + *line);
    const Vector u = vector_from_json(req["u"], "u");
    if (static_cast<std::size_t>(u.size()) != plant.n_u()) throw ProtocolError("request dimension mismatch: " + *line);
    channel.send(encode_response(plant.measure(u)));
    ++served;
  }
  return served;
}

Trajectory external_plant_session(ProblemSpec spec, const RunConfig& cfg, std::shared_ptr<LineChannel> io) {
  spec.oracle = std::make_shared<ProtocolPlant>(std::move(io), spec.n_u(), spec.n_gp());
  const std::string name = spec.name;
  try {
    Trajectory traj = Engine(std::move(spec), cfg).run();
    write_outputs(traj, cfg, name);
    return traj;
  } catch (const RunAborted& e) {
    write_outputs(e.partial(), cfg, name);
    throw;
  }
}

}  // namespace scfo
