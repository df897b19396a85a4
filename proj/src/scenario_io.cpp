#include "frsim/scenario_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "frsim/errors.hpp"

namespace frsim {
namespace {

using nlohmann::json;

// 17 significant digits round-trip an IEEE double exactly through text.
std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Tracks which keys of one JSON object were consumed so leftovers can be
// rejected with their full field path.
class ObjectView {
 public:
  ObjectView(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ValidationError((path_.empty() ? std::string("document") : path_) +
                            ": expected an object");
    }
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& require(const std::string& key) {
    const json* v = find(key);
    if (v == nullptr) {
      throw ValidationError(path_of(key) + ": missing required field");
    }
    return *v;
  }

  std::string path_of(const std::string& key) const { return join(path_, key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (seen_.count(it.key()) == 0) {
        throw ValidationError((path_.empty() ? std::string("scenario") : path_) +
                              ": unknown key \"" + it.key() + "\"");
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) {
    throw ValidationError(path + ": expected a number");
  }
  return j.get<double>();
}

std::int64_t as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) {
    throw ValidationError(path + ": expected an integer");
  }
  return j.get<std::int64_t>();
}

std::uint64_t as_uint(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) {
    return j.get<std::uint64_t>();
  }
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  throw ValidationError(path + ": expected a nonnegative integer");
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) {
    throw ValidationError(path + ": expected a boolean");
  }
  return j.get<bool>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) {
    throw ValidationError(path + ": expected a string");
  }
  return j.get<std::string>();
}

ParameterVector as_vector(const json& j, const std::string& path) {
  if (!j.is_array()) {
    throw ValidationError(path + ": expected an array of numbers");
  }
  ParameterVector out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(as_double(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<ParameterVector> as_matrix(const json& j, const std::string& path) {
  if (!j.is_array()) {
    throw ValidationError(path + ": expected an array of arrays");
  }
  std::vector<ParameterVector> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(as_vector(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<ParameterVector> gaussian_points(std::int64_t samples, std::size_t dim,
                                             std::uint64_t data_seed) {
  RoundRng rng(data_seed, RunId::kFair, 0, 0);
  std::vector<ParameterVector> points(static_cast<std::size_t>(samples),
                                      ParameterVector(dim, 0.0));
  std::uint64_t index = 0;
  for (auto& p : points) {
    for (auto& x : p) {
      x = rng.normal(Stream::kInit, index++);
    }
  }
  return points;
}

// Points center + spread*N(0,I), recentered so the sample mean equals the
// center exactly; the quadratic local minimizer is then the center.
std::vector<ParameterVector> quadratic_cloud(std::int64_t samples, const ParameterVector& center,
                                             double spread, std::uint64_t data_seed) {
  auto points = gaussian_points(samples, center.size(), data_seed);
  ParameterVector mean(center.size(), 0.0);
  for (auto& p : points) {
    for (std::size_t d = 0; d < p.size(); ++d) {
      p[d] = center[d] + spread * p[d];
      mean[d] += p[d] / static_cast<double>(samples);
    }
  }
  for (auto& p : points) {
    for (std::size_t d = 0; d < p.size(); ++d) {
      p[d] += center[d] - mean[d];
    }
  }
  return points;
}

// Two Gaussian blobs with alternating 0/1 labels, class means separated by
// `separation` along the all-ones diagonal.
void logistic_blobs(std::int64_t samples, std::size_t dim, double separation,
                    std::uint64_t data_seed, std::vector<ParameterVector>& features,
                    std::vector<double>& targets) {
  features = gaussian_points(samples, dim, data_seed);
  targets.resize(static_cast<std::size_t>(samples));
  const double shift = 0.5 * separation / std::sqrt(static_cast<double>(dim));
  for (std::size_t n = 0; n < features.size(); ++n) {
    const double y = static_cast<double>(n % 2);
    const double sign = y > 0.5 ? 1.0 : -1.0;
    for (auto& x : features[n]) {
      x += sign * shift;
    }
    targets[n] = y;
  }
}

std::optional<RhoDecay> parse_rho_decay(const json& j, const std::string& path) {
  ObjectView v(j, path);
  RhoDecay decay;
  if (const json* e = v.find("exponent")) {
    decay.exponent = as_double(*e, v.path_of("exponent"));
  }
  if (const json* l = v.find("limit")) {
    decay.limit = as_double(*l, v.path_of("limit"));
  }
  v.finish();
  return decay;
}

NoiseSchedule parse_schedule(const json& j, const std::string& path) {
  ObjectView v(j, path);
  const std::string kind = as_string(v.require("kind"), v.path_of("kind"));
  NoiseSchedule schedule;
  if (kind == "fixed") {
    FixedSchedule s;
    s.phi = as_double(v.require("phi"), v.path_of("phi"));
    schedule = s;
  } else if (kind == "power_decay") {
    PowerDecaySchedule s;
    s.sigma = as_double(v.require("sigma"), v.path_of("sigma"));
    if (const json* g = v.find("gamma")) {
      s.gamma = as_double(*g, v.path_of("gamma"));
    }
    schedule = s;
  } else if (kind == "sgd_mimic") {
    SgdMimicSchedule s;
    s.lr = as_double(v.require("lr"), v.path_of("lr"));
    s.r = as_double(v.require("r"), v.path_of("r"));
    s.sigma = as_double(v.require("sigma"), v.path_of("sigma"));
    s.epochs = as_double(v.require("epochs"), v.path_of("epochs"));
    s.S = as_double(v.require("batch"), v.path_of("batch"));
    s.M = as_double(v.require("samples"), v.path_of("samples"));
    schedule = s;
  } else {
    throw ValidationError(v.path_of("kind") +
                          ": must be \"fixed\", \"power_decay\", or \"sgd_mimic\"");
  }
  v.finish();
  return schedule;
}

FairClientSpec parse_fair_client(const json& j, const std::string& path) {
  ObjectView v(j, path);
  const std::string type = as_string(v.require("type"), v.path_of("type"));
  if (type == "ou") {
    OUClientSpec spec;
    spec.samples = as_int(v.require("samples"), v.path_of("samples"));
    spec.eta = as_double(v.require("eta"), v.path_of("eta"));
    spec.theta_star = as_vector(v.require("theta_star"), v.path_of("theta_star"));
    spec.rho = as_double(v.require("rho"), v.path_of("rho"));
    if (const json* d = v.find("rho_decay")) {
      spec.rho_decay = parse_rho_decay(*d, v.path_of("rho_decay"));
    }
    v.finish();
    return spec;
  }
  if (type == "ou_physical") {
    OUPhysicalSpec spec;
    spec.samples = as_int(v.require("samples"), v.path_of("samples"));
    spec.lr = as_double(v.require("lr"), v.path_of("lr"));
    spec.r = as_double(v.require("r"), v.path_of("r"));
    spec.sigma = as_double(v.require("sigma"), v.path_of("sigma"));
    spec.epochs = as_double(v.require("epochs"), v.path_of("epochs"));
    spec.batch = as_double(v.require("batch"), v.path_of("batch"));
    spec.theta_star = as_vector(v.require("theta_star"), v.path_of("theta_star"));
    v.finish();
    return spec;
  }
  if (type == "sgd") {
    SGDClientSpec spec;
    spec.samples = as_int(v.require("samples"), v.path_of("samples"));
    spec.lr = as_double(v.require("lr"), v.path_of("lr"));
    spec.epochs = as_int(v.require("epochs"), v.path_of("epochs"));
    spec.batch = as_int(v.require("batch"), v.path_of("batch"));
    const std::string loss = as_string(v.require("loss"), v.path_of("loss"));
    const json* data = v.find("data");
    const json* features = v.find("features");
    if (data != nullptr && features != nullptr) {
      throw ValidationError(path + ": give inline \"features\" or a \"data\" generator, not both");
    }
    if (loss == "quadratic") {
      QuadraticLoss q;
      q.r = as_double(v.require("r"), v.path_of("r"));
      if (data != nullptr) {
        ObjectView d(*data, v.path_of("data"));
        const std::string kind = as_string(d.require("kind"), d.path_of("kind"));
        if (kind != "quadratic_cloud") {
          throw ValidationError(d.path_of("kind") + ": quadratic clients use \"quadratic_cloud\"");
        }
        const ParameterVector center = as_vector(d.require("center"), d.path_of("center"));
        const double spread = as_double(d.require("spread"), d.path_of("spread"));
        const std::uint64_t data_seed = as_uint(d.require("data_seed"), d.path_of("data_seed"));
        d.finish();
        if (spread < 0.0) {
          throw ValidationError(d.path_of("spread") + ": must be >= 0");
        }
        if (spec.samples < 1) {
          throw ValidationError(v.path_of("samples") + ": must be >= 1");
        }
        spec.features = quadratic_cloud(spec.samples, center, spread, data_seed);
        q.theta_star = center;
      } else {
        if (features == nullptr) {
          throw ValidationError(path + ": needs inline \"features\" or a \"data\" generator");
        }
        spec.features = as_matrix(*features, v.path_of("features"));
        q.theta_star = as_vector(v.require("theta_star"), v.path_of("theta_star"));
      }
      spec.loss = q;
    } else if (loss == "logistic") {
      if (data != nullptr) {
        ObjectView d(*data, v.path_of("data"));
        const std::string kind = as_string(d.require("kind"), d.path_of("kind"));
        if (kind != "logistic_blobs") {
          throw ValidationError(d.path_of("kind") + ": logistic clients use \"logistic_blobs\"");
        }
        const std::int64_t dim = as_int(d.require("dim"), d.path_of("dim"));
        const double separation = as_double(d.require("separation"), d.path_of("separation"));
        const std::uint64_t data_seed = as_uint(d.require("data_seed"), d.path_of("data_seed"));
        d.finish();
        if (dim < 1) {
          throw ValidationError(d.path_of("dim") + ": must be >= 1");
        }
        if (separation < 0.0) {
          throw ValidationError(d.path_of("separation") + ": must be >= 0");
        }
        if (spec.samples < 1) {
          throw ValidationError(v.path_of("samples") + ": must be >= 1");
        }
        logistic_blobs(spec.samples, static_cast<std::size_t>(dim), separation, data_seed,
                       spec.features, spec.targets);
      } else {
        if (features == nullptr) {
          throw ValidationError(path + ": needs inline \"features\" or a \"data\" generator");
        }
        spec.features = as_matrix(*features, v.path_of("features"));
        spec.targets = as_vector(v.require("targets"), v.path_of("targets"));
      }
      spec.loss = LogisticLoss{};
    } else {
      throw ValidationError(v.path_of("loss") + ": must be \"quadratic\" or \"logistic\"");
    }
    v.finish();
    return spec;
  }
  throw ValidationError(v.path_of("type") + ": must be \"ou\", \"ou_physical\", or \"sgd\"");
}

FreeRiderSpec parse_rider(const json& j, const std::string& path) {
  ObjectView v(j, path);
  FreeRiderSpec spec;
  spec.samples = as_int(v.require("samples"), v.path_of("samples"));
  const std::string strategy = as_string(v.require("strategy"), v.path_of("strategy"));
  if (strategy == "disguised") {
    spec.schedule = parse_schedule(v.require("schedule"), v.path_of("schedule"));
    if (const json* c = v.find("calibrate_sigma")) {
      spec.calibrate_sigma = as_bool(*c, v.path_of("calibrate_sigma"));
    }
    if (const json* s = v.find("calibration_scale")) {
      spec.calibration_scale = as_double(*s, v.path_of("calibration_scale"));
    }
  } else if (strategy != "plain") {
    throw ValidationError(v.path_of("strategy") + ": must be \"plain\" or \"disguised\"");
  }
  v.finish();
  return spec;
}

Scheme parse_scheme(const json& j, const std::string& path) {
  ObjectView v(j, path);
  const std::string type = as_string(v.require("type"), v.path_of("type"));
  Scheme scheme;
  if (type == "fedavg") {
    scheme.kind = Scheme::Kind::kFedAvg;
  } else if (type == "fedprox") {
    scheme.kind = Scheme::Kind::kFedProx;
    if (const json* mu = v.find("mu")) {
      scheme.mu = as_double(*mu, v.path_of("mu"));
    }
  } else {
    throw ValidationError(v.path_of("type") + ": must be \"fedavg\" or \"fedprox\"");
  }
  v.finish();
  return scheme;
}

std::size_t inferred_dim(const Scenario& scenario) {
  for (const auto& client : scenario.fair_clients) {
    if (const auto* ou = std::get_if<OUClientSpec>(&client)) {
      return ou->theta_star.size();
    }
    if (const auto* ph = std::get_if<OUPhysicalSpec>(&client)) {
      return ph->theta_star.size();
    }
    if (const auto* sg = std::get_if<SGDClientSpec>(&client)) {
      if (!sg->features.empty()) {
        return sg->features[0].size();
      }
    }
  }
  return 0;
}

std::int64_t client_samples(const FairClientSpec& client) {
  return std::visit([](const auto& spec) { return spec.samples; }, client);
}

double parse_csv_double(const std::string& field, const std::string& context) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end != begin + field.size() || field.empty()) {
    throw ValidationError(context + ": malformed number \"" + field + "\"");
  }
  return value;
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::string csv_header(const Scenario& scenario) {
  std::string header = "round,client_id,role";
  for (std::size_t d = 0; d < scenario.dim(); ++d) {
    header += ",p" + std::to_string(d);
  }
  if (scenario.has_sgd_clients()) {
    header += ",loss";
  }
  return header;
}

json record_to_json(const ClientRecord& rec) {
  json r;
  r["upload"] = rec.upload;
  r["noise"] = rec.noise;
  r["noise_scale"] = rec.noise_scale;
  r["loss"] = std::isnan(rec.loss) ? json() : json(rec.loss);
  r["plain"] = rec.plain;
  return r;
}

}  // namespace

Scenario load_scenario(const std::string& path) {
  const std::string text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("scenario parse error in " + path + ": " + e.what());
  }
  return parse_scenario(j);
}

Scenario parse_scenario(const nlohmann::json& j) {
  ObjectView v(j, "");
  Scenario scenario;
  if (const json* d = v.find("description")) {
    as_string(*d, v.path_of("description"));
  }
  if (const json* fc = v.find("fair_clients")) {
    if (!fc->is_array()) {
      throw ValidationError("fair_clients: expected an array");
    }
    for (std::size_t i = 0; i < fc->size(); ++i) {
      scenario.fair_clients.push_back(
          parse_fair_client((*fc)[i], "fair_clients[" + std::to_string(i) + "]"));
    }
  }
  if (const json* fr = v.find("free_riders")) {
    if (!fr->is_array()) {
      throw ValidationError("free_riders: expected an array");
    }
    for (std::size_t i = 0; i < fr->size(); ++i) {
      scenario.free_riders.push_back(
          parse_rider((*fr)[i], "free_riders[" + std::to_string(i) + "]"));
    }
  }
  if (const json* s = v.find("scheme")) {
    scenario.scheme = parse_scheme(*s, "scheme");
  }
  if (const json* r = v.find("rounds")) {
    scenario.rounds = as_int(*r, "rounds");
  }
  if (const json* s = v.find("seed")) {
    scenario.seed = as_uint(*s, "seed");
  }
  if (const json* rc = v.find("replicate_count")) {
    scenario.replicate_count = as_int(*rc, "replicate_count");
  }
  if (const json* t0 = v.find("theta0")) {
    scenario.theta0 = as_vector(*t0, "theta0");
  }
  if (const json* p = v.find("output_trace")) {
    as_string(*p, "output_trace");
  }
  if (const json* p = v.find("output_report")) {
    as_string(*p, "output_report");
  }
  v.finish();
  if (scenario.theta0.empty()) {
    const std::size_t dim = inferred_dim(scenario);
    if (dim == 0) {
      throw ValidationError("theta0: required when no fair client fixes the model dimension");
    }
    scenario.theta0.assign(dim, 0.0);
  }
  scenario.validate();
  return scenario;
}

ScenarioOutputs scenario_outputs(const nlohmann::json& j) {
  ScenarioOutputs out;
  if (!j.is_object()) {
    return out;
  }
  if (auto it = j.find("output_trace"); it != j.end() && it->is_string()) {
    out.trace_path = it->get<std::string>();
  }
  if (auto it = j.find("output_report"); it != j.end() && it->is_string()) {
    out.report_path = it->get<std::string>();
  }
  return out;
}

std::string trace_to_csv(const RunTrace& trace, const Scenario& scenario) {
  const bool with_loss = scenario.has_sgd_clients();
  const std::size_t dim = scenario.dim();
  std::string out = csv_header(scenario);
  out += '\n';
  for (const RoundTrace& round : trace.rounds) {
    std::size_t id = 0;
    auto emit = [&](const ClientRecord& rec, const char* role) {
      if (rec.upload.size() != dim) {
        throw ValidationError("trace_to_csv: upload dimension mismatch at client " +
                              std::to_string(id));
      }
      out += std::to_string(round.round);
      out += ',';
      out += std::to_string(id++);
      out += ',';
      out += role;
      for (double x : rec.upload) {
        out += ',';
        out += format_double(x);
      }
      if (with_loss) {
        out += ',';
        if (!std::isnan(rec.loss)) {
          out += format_double(rec.loss);
        }
      }
      out += '\n';
    };
    for (const ClientRecord& rec : round.fair) {
      emit(rec, "fair");
    }
    for (const ClientRecord& rec : round.riders) {
      emit(rec, "rider");
    }
  }
  return out;
}

nlohmann::json trace_to_json(const RunTrace& trace, const Scenario& scenario) {
  (void)scenario;
  json out;
  out["theta0"] = trace.theta0;
  json rounds = json::array();
  for (const RoundTrace& round : trace.rounds) {
    json r;
    r["round"] = round.round;
    r["theta_global"] = round.theta_global;
    json fair = json::array();
    for (const ClientRecord& rec : round.fair) {
      fair.push_back(record_to_json(rec));
    }
    json riders = json::array();
    for (const ClientRecord& rec : round.riders) {
      riders.push_back(record_to_json(rec));
    }
    r["fair"] = std::move(fair);
    r["riders"] = std::move(riders);
    r["aggregated"] = round.aggregated;
    rounds.push_back(std::move(r));
  }
  out["rounds"] = std::move(rounds);
  out["final_theta"] = trace.final_theta;
  json calibrated = json::array();
  for (double s : trace.calibrated_sigma) {
    calibrated.push_back(std::isnan(s) ? json() : json(s));
  }
  out["calibrated_sigma"] = std::move(calibrated);
  return out;
}

RunTrace trace_from_csv(const std::string& text, const Scenario& scenario) {
  scenario.validate();
  const bool with_loss = scenario.has_sgd_clients();
  const std::size_t dim = scenario.dim();
  const std::size_t fair_count = scenario.fair_clients.size();
  const std::size_t rider_count = scenario.free_riders.size();
  const std::size_t per_round = fair_count + rider_count;
  const std::size_t columns = 3 + dim + (with_loss ? 1 : 0);

  std::vector<std::string> lines;
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') {
        line.pop_back();
      }
      lines.push_back(line);
    }
  }
  if (lines.empty()) {
    throw ValidationError("trace CSV: missing header row");
  }
  const std::string expected = csv_header(scenario);
  if (lines[0] != expected) {
    throw ValidationError("trace CSV: header mismatch, expected \"" + expected + "\"");
  }
  const std::size_t data_rows = lines.size() - 1;
  if (per_round == 0 || data_rows % per_round != 0) {
    throw ValidationError("trace CSV: row count " + std::to_string(data_rows) +
                          " is not a multiple of the scenario's " + std::to_string(per_round) +
                          " clients");
  }

  SampleWeights weights;
  {
    std::vector<std::int64_t> counts;
    for (const auto& client : scenario.fair_clients) {
      counts.push_back(client_samples(client));
    }
    for (const auto& rider : scenario.free_riders) {
      counts.push_back(rider.samples);
    }
    weights = SampleWeights::from_counts(counts);
  }

  RunTrace trace;
  trace.theta0 = scenario.theta0;
  trace.calibrated_sigma.assign(rider_count, std::numeric_limits<double>::quiet_NaN());
  ParameterVector theta = scenario.theta0;

  const std::size_t round_count = data_rows / per_round;
  std::size_t row = 1;
  for (std::size_t g = 0; g < round_count; ++g) {
    RoundTrace rt;
    rt.theta_global = theta;
    std::vector<ParameterVector> uploads;
    uploads.reserve(per_round);
    for (std::size_t i = 0; i < per_round; ++i, ++row) {
      const std::string context = "trace CSV row " + std::to_string(row + 1);
      const auto fields = split_csv_row(lines[row]);
      if (fields.size() != columns) {
        throw ValidationError(context + ": expected " + std::to_string(columns) +
                              " fields, found " + std::to_string(fields.size()));
      }
      const auto round_id = static_cast<std::int64_t>(parse_csv_double(fields[0], context));
      const auto client_id = static_cast<std::int64_t>(parse_csv_double(fields[1], context));
      if (i == 0) {
        rt.round = round_id;
      } else if (round_id != rt.round) {
        throw ValidationError(context + ": round changed mid-group");
      }
      if (client_id != static_cast<std::int64_t>(i)) {
        throw ValidationError(context + ": client_id out of order, expected " +
                              std::to_string(i));
      }
      const std::string& role = fields[2];
      const std::string expected_role = i < fair_count ? "fair" : "rider";
      if (role != expected_role) {
        throw ValidationError(context + ": role \"" + role + "\", expected \"" + expected_role +
                              "\"");
      }
      ClientRecord rec;
      rec.upload.resize(dim);
      for (std::size_t d = 0; d < dim; ++d) {
        rec.upload[d] = parse_csv_double(fields[3 + d], context);
      }
      if (with_loss) {
        const std::string& loss_field = fields[3 + dim];
        rec.loss = loss_field.empty() ? std::numeric_limits<double>::quiet_NaN()
                                      : parse_csv_double(loss_field, context);
      }
      rec.plain = rec.upload == theta;
      uploads.push_back(rec.upload);
      if (i < fair_count) {
        rt.fair.push_back(std::move(rec));
      } else {
        rt.riders.push_back(std::move(rec));
      }
    }
    rt.aggregated = weighted_average(uploads, weights);
    theta = rt.aggregated;
    trace.rounds.push_back(std::move(rt));
  }
  trace.final_theta = theta;
  return trace;
}

nlohmann::json report_to_json(const MomentReport& report) {
  json out;
  out["replicates"] = report.replicates;
  out["epsilon"] = report.epsilon;
  out["ratio"] = report.ratio;
  json checkpoints = json::array();
  for (const CheckpointMoments& cp : report.checkpoints) {
    json c;
    c["round"] = cp.round;
    c["empirical_mean"] = cp.empirical_mean;
    c["empirical_mean_se"] = cp.empirical_mean_se;
    c["empirical_variance"] = cp.empirical_variance;
    c["empirical_variance_se"] = cp.empirical_variance_se;
    c["theory_expectation"] = cp.theory_expectation;
    c["theory_asymptotic_variance"] = cp.theory_asymptotic_variance;
    c["exact_gap_variance"] = cp.exact_gap_variance;
    checkpoints.push_back(std::move(c));
  }
  out["checkpoints"] = std::move(checkpoints);
  return out;
}

MomentReport report_from_json(const nlohmann::json& j) {
  ObjectView v(j, "report");
  MomentReport report;
  report.replicates = as_int(v.require("replicates"), v.path_of("replicates"));
  report.epsilon = as_double(v.require("epsilon"), v.path_of("epsilon"));
  report.ratio = as_double(v.require("ratio"), v.path_of("ratio"));
  const json& checkpoints = v.require("checkpoints");
  if (!checkpoints.is_array()) {
    throw ValidationError("report.checkpoints: expected an array");
  }
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    const std::string path = "report.checkpoints[" + std::to_string(i) + "]";
    ObjectView c(checkpoints[i], path);
    CheckpointMoments cp;
    cp.round = as_int(c.require("round"), c.path_of("round"));
    cp.empirical_mean = as_vector(c.require("empirical_mean"), c.path_of("empirical_mean"));
    cp.empirical_mean_se =
        as_vector(c.require("empirical_mean_se"), c.path_of("empirical_mean_se"));
    cp.empirical_variance =
        as_vector(c.require("empirical_variance"), c.path_of("empirical_variance"));
    cp.empirical_variance_se =
        as_vector(c.require("empirical_variance_se"), c.path_of("empirical_variance_se"));
    cp.theory_expectation =
        as_double(c.require("theory_expectation"), c.path_of("theory_expectation"));
    cp.theory_asymptotic_variance =
        as_double(c.require("theory_asymptotic_variance"), c.path_of("theory_asymptotic_variance"));
    cp.exact_gap_variance =
        as_double(c.require("exact_gap_variance"), c.path_of("exact_gap_variance"));
    c.finish();
    report.checkpoints.push_back(std::move(cp));
  }
  v.finish();
  return report;
}

nlohmann::json detection_to_json(const DetectionReport& report) {
  json out;
  json clients = json::array();
  for (const ClientDetection& client : report.clients) {
    json c;
    c["client_id"] = client.client_id;
    c["role"] = client.role;
    c["flag_rate"] = client.flag_rate;
    c["mean_rms"] = client.mean_rms;
    c["loglog_slope"] = std::isnan(client.loglog_slope) ? json() : json(client.loglog_slope);
    json rounds = json::array();
    for (const DetectionRound& row : client.rounds) {
      json r;
      r["round"] = row.round;
      r["flagged_plain"] = row.flagged_plain;
      r["increment_rms"] = row.increment_rms;
      r["consecutive_flag_count"] = row.consecutive_flag_count;
      rounds.push_back(std::move(r));
    }
    c["rounds"] = std::move(rounds);
    clients.push_back(std::move(c));
  }
  out["clients"] = std::move(clients);
  return out;
}

nlohmann::json band_to_json(const BandResult& band) {
  json out;
  out["attacked_final_loss"] = band.attacked_final_loss;
  out["band_min"] = band.band_min;
  out["band_max"] = band.band_max;
  out["inside"] = band.inside;
  out["fair_final_losses"] = band.fair_final_losses;
  out["attacked_loss_curve"] = band.attacked_loss_curve;
  return out;
}

void export_trace(const RunTrace& trace, const Scenario& scenario, const std::string& path,
                  const std::string& format) {
  if (format == "csv") {
    write_text_file(path, trace_to_csv(trace, scenario));
  } else if (format == "json") {
    write_text_file(path, trace_to_json(trace, scenario).dump(2) + "\n");
  } else {
    throw ValidationError("format: must be \"csv\" or \"json\"");
  }
}

void export_report(const MomentReport& report, const std::string& path,
                   const std::string& format) {
  if (format == "json") {
    write_text_file(path, report_to_json(report).dump(2) + "\n");
    return;
  }
  if (format != "csv") {
    throw ValidationError("format: must be \"csv\" or \"json\"");
  }
  std::string out =
      "round,coordinate,empirical_mean,empirical_mean_se,empirical_variance,"
      "empirical_variance_se,theory_expectation,theory_asymptotic_variance,"
      "exact_gap_variance,replicates,epsilon,ratio\n";
  for (const CheckpointMoments& cp : report.checkpoints) {
    for (std::size_t d = 0; d < cp.empirical_mean.size(); ++d) {
      out += std::to_string(cp.round);
      out += ',';
      out += std::to_string(d);
      for (double x : {cp.empirical_mean[d], cp.empirical_mean_se[d], cp.empirical_variance[d],
                       cp.empirical_variance_se[d], cp.theory_expectation,
                       cp.theory_asymptotic_variance, cp.exact_gap_variance}) {
        out += ',';
        out += format_double(x);
      }
      out += ',';
      out += std::to_string(report.replicates);
      out += ',';
      out += format_double(report.epsilon);
      out += ',';
      out += format_double(report.ratio);
      out += '\n';
    }
  }
  write_text_file(path, out);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("cannot read file: " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) {
    throw RuntimeFailure("read failed: " + path);
  }
  return buffer.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw RuntimeFailure("cannot write file: " + path);
  }
  out << text;
  out.flush();
  if (!out) {
    throw RuntimeFailure("write failed: " + path);
  }
}

}  // namespace frsim
