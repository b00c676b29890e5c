#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"
#include "scfo/bounds.hpp"
#include "scfo/engine.hpp"
#include "scfo/errors.hpp"
#include "scfo/fj.hpp"
#include "scfo/model.hpp"

namespace scfo {

using Json = nlohmann::json;

/// Shortest decimal that parses back to the same double.
std::string format_real(double x);

Vector vector_from_json(const Json& j, const std::string& what);
Matrix matrix_from_json(const Json& j, const std::string& what);
Json to_json(const Vector& v);
Json to_json(const Matrix& m);

/// Creates the oracle for a "stdio" plant. Receives n_u and n_gp.
using StdioPlantFactory = std::function<std::shared_ptr<PlantOracle>(std::size_t, std::size_t)>;

/// Problem definition. `base_dir` resolves "file:" targets.
ProblemSpec problem_from_json(const Json& j, const std::string& base_dir,
                              const StdioPlantFactory& stdio = nullptr);
ProblemSpec load_problem(const std::string& path, const StdioPlantFactory& stdio = nullptr);

/// "box_center", "file:<path>" or a JSON vector literal.
TargetRule parse_target(const Json& j, const std::string& base_dir);

RunConfig run_config_from_json(const Json& j, const std::string& base_dir);
RunConfig load_run_config(const std::string& path);

Json ceilings_to_json(const ParameterCeilings& c);
ParameterCeilings ceilings_from_json(const Json& j);

/// Columns: k, u1..u_n, phi, g_p1.., g1.., K, level, status.
std::string trajectory_csv(const Trajectory& traj);
Json trajectory_to_json(const Trajectory& traj, const std::string& problem_name);
Trajectory trajectory_from_json(const Json& j);

Json growth_to_json(const GrowthBounds& gb);
Json certificate_to_json(const FjCertificate& cert);

/// Writes through a temporary file in the same directory and renames it.
void atomic_write(const std::string& path, const std::string& content);

/// Writes the CSV and JSON outputs named in the config, if any.
void write_outputs(const Trajectory& traj, const RunConfig& cfg, const std::string& problem_name);

std::string read_file(const std::string& path);

/// A malformed or missing protocol message.
class ProtocolError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// One newline-delimited message stream.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void send(const std::string& line) = 0;
  /// Next line, or nullopt once the stream is closed.
  virtual std::optional<std::string> receive() = 0;
};

class StreamChannel : public LineChannel {
 public:
  StreamChannel(std::istream& in, std::ostream& out) : in_(in), out_(out) {}
  void send(const std::string& line) override;
  std::optional<std::string> receive() override;

 private:
  std::istream& in_;
  std::ostream& out_;
};

std::string encode_request(std::size_t k, const Vector& u);
std::string encode_response(const Measurement& m);
/// Throws ProtocolError on malformed input or shape mismatch.
Measurement decode_response(const std::string& line, std::size_t n_u, std::size_t n_gp);

/// A plant answered by a remote process over a LineChannel.
class ProtocolPlant : public PlantOracle {
 public:
  ProtocolPlant(std::shared_ptr<LineChannel> channel, std::size_t n_u, std::size_t n_gp,
                std::string name = "stdio");
  Measurement measure(const Vector& u) override;
  std::size_t n_u() const override { return n_u_; }
  std::size_t n_gp() const override { return n_gp_; }
  std::string name() const override { return name_; }

 private:
  std::shared_ptr<LineChannel> channel_;
  std::size_t n_u_;
  std::size_t n_gp_;
  std::string name_;
  std::size_t k_ = 0;
};

/// Answers requests with `plant` until the channel closes. Returns the count.
std::size_t serve_plant(PlantOracle& plant, LineChannel& channel);

/// Runs the engine against a remote plant. The partial trajectory is written
/// to the configured outputs before a failure is rethrown.
Trajectory external_plant_session(ProblemSpec spec, const RunConfig& cfg, std::shared_ptr<LineChannel> io);

}  // namespace scfo
