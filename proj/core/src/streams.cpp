#include "condafr/streams.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "condafr/errors.hpp"

namespace condafr::streams {

namespace {

constexpr double kPi = std::numbers::pi;

std::size_t moon_pairs(const StreamSpec& spec) { return (spec.num_classes + 1) / 2; }

std::array<double, 2> moon_pair_offset(std::size_t pair, std::size_t pairs) {
  if (pairs <= 1) return {0.0, 0.0};
  const double radius = std::max(5.0, 1.9 / std::sin(kPi / static_cast<double>(pairs)));
  const double angle = 2.0 * kPi * static_cast<double>(pair) / static_cast<double>(pairs);
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

std::array<double, 2> blob_center(std::size_t label, std::size_t classes) {
  // Radius grows with the label so the layout has no rotational symmetry.
  const double frac = static_cast<double>(label) / static_cast<double>(classes);
  const double radius = 3.0 * (1.0 + 0.5 * frac);
  return {radius * std::cos(2.0 * kPi * frac), radius * std::sin(2.0 * kPi * frac)};
}

Tensor sample_domain(const StreamSpec& spec, int first, int last, const DomainTransform& t, Rng& rng,
                     std::vector<int>& labels) {
  Tensor x = Tensor::matrix(0, 2);
  for (int c = first; c < last; ++c) {
    Tensor part = apply_transform(sample_base(spec, static_cast<std::size_t>(c), spec.samples_per_class, rng), t, rng);
    x = vstack(x, part);
    labels.insert(labels.end(), spec.samples_per_class, c);
  }
  return x;
}

Environment make_environment(const StreamSpec& spec, std::size_t index, int first, int last,
                             const DomainTransform& support, const DomainTransform& query, Rng& rng) {
  std::vector<int> ys;
  std::vector<int> yq;
  Tensor xs = sample_domain(spec, first, last, support, rng, ys);
  Tensor xq = sample_domain(spec, first, last, query, rng, yq);
  return Environment(index, std::move(xs), std::move(ys), std::move(xq), std::move(yq));
}

[[noreturn]] void fail_row(std::size_t line, const std::string& what) {
  throw DataError("line " + std::to_string(line) + ": " + what);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && *b == ' ') ++b;
  while (e > b && (e[-1] == ' ' || e[-1] == '\r')) --e;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc{} && p == e && b != e;
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

}  // namespace

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::task_drift: return "task_drift";
    case Scenario::domain_drift: return "domain_drift";
    case Scenario::combined: return "combined";
  }
  return "?";
}

std::string to_string(BaseDistribution b) { return b == BaseDistribution::moons ? "moons" : "blobs"; }

std::string to_string(DifficultyOrder o) {
  switch (o) {
    case DifficultyOrder::as_given: return "as_given";
    case DifficultyOrder::ascending: return "ascending";
    case DifficultyOrder::descending: return "descending";
  }
  return "?";
}

bool DomainTransform::is_identity() const noexcept {
  return rotation == 0.0 && translation[0] == 0.0 && translation[1] == 0.0 && scale == 1.0 && noise_std == 0.0;
}

std::array<double, 4> DomainTransform::magnitude() const noexcept {
  return {std::abs(rotation), std::hypot(translation[0], translation[1]), std::abs(std::log(scale)), noise_std};
}

void StreamSpec::validate() const {
  if (samples_per_class == 0) throw ConfigError("stream.samples_per_class", "stream.samples_per_class must be positive");
  if (num_classes == 0) throw ConfigError("stream.num_classes", "stream.num_classes must be positive");
  if (base_noise < 0.0) throw ConfigError("stream.base_noise", "stream.base_noise must be nonnegative");
  for (const auto& t : transforms) {
    if (!(t.scale > 0.0)) throw ConfigError("stream.transforms", "every transform scale must be positive");
    if (t.noise_std < 0.0) throw ConfigError("stream.transforms", "transform noise must be nonnegative");
  }
  switch (scenario) {
    case Scenario::task_drift:
    case Scenario::combined: {
      if (classes_per_task.empty()) {
        throw ConfigError("stream.classes_per_task", "stream.classes_per_task must list at least one task");
      }
      if (std::find(classes_per_task.begin(), classes_per_task.end(), 0u) != classes_per_task.end()) {
        throw ConfigError("stream.classes_per_task", "stream.classes_per_task entries must be positive");
      }
      const std::size_t total = std::accumulate(classes_per_task.begin(), classes_per_task.end(), std::size_t{0});
      if (total != num_classes) {
        throw ConfigError("stream.classes_per_task", "stream.classes_per_task sums to " + std::to_string(total) +
                                                         " but stream.num_classes is " + std::to_string(num_classes));
      }
      if (num_environments != classes_per_task.size()) {
        throw ConfigError("stream.num_environments",
                          "stream.num_environments must equal the number of entries in stream.classes_per_task");
      }
      if (scenario == Scenario::task_drift && transforms.size() != 2) {
        throw ConfigError("stream.transforms", "task_drift needs exactly two transforms (support, query)");
      }
      if (scenario == Scenario::combined && transforms.size() < 2) {
        throw ConfigError("stream.transforms", "combined needs a pool of at least two transforms");
      }
      break;
    }
    case Scenario::domain_drift:
      if (num_environments == 0) throw ConfigError("stream.num_environments", "stream.num_environments must be positive");
      if (transforms.size() != num_environments + 1) {
        throw ConfigError("stream.transforms",
                          "domain_drift needs one support transform plus one per environment (" +
                              std::to_string(num_environments + 1) + ")");
      }
      break;
  }
}

std::pair<int, int> StreamSpec::label_range(std::size_t task) const {
  if (task >= classes_per_task.size()) throw std::out_of_range("task index outside classes_per_task");
  const std::size_t first = std::accumulate(classes_per_task.begin(), classes_per_task.begin() + task, std::size_t{0});
  return {static_cast<int>(first), static_cast<int>(first + classes_per_task[task])};
}

StreamSpec default_spec(Scenario scenario) {
  StreamSpec spec;
  spec.scenario = scenario;
  switch (scenario) {
    case Scenario::task_drift:
      spec.transforms = {DomainTransform{}, DomainTransform{0.06, {0.4, -0.2}, 1.0, 0.05}};
      break;
    case Scenario::domain_drift:
      spec.base = BaseDistribution::blobs;
      spec.base_noise = 0.4;
      spec.num_classes = 6;
      spec.classes_per_task = {6};
      spec.num_environments = 3;
      spec.order = DifficultyOrder::ascending;
      spec.transforms = {DomainTransform{},
                         DomainTransform{0.1, {0.3, 0.0}, 1.0, 0.05},
                         DomainTransform{0.2, {0.0, 0.4}, 1.1, 0.05},
                         DomainTransform{0.3, {-0.3, 0.2}, 0.9, 0.05}};
      break;
    case Scenario::combined:
      spec.transforms = {DomainTransform{},
                         DomainTransform{0.06, {0.4, -0.2}, 1.0, 0.05},
                         DomainTransform{-0.06, {-0.3, 0.3}, 1.0, 0.05},
                         DomainTransform{0.0, {0.0, 0.0}, 1.1, 0.1}};
      break;
  }
  return spec;
}

Environment::Environment(std::size_t index, Tensor support_x, std::vector<int> support_y, Tensor query_x,
                         std::vector<int> query_eval_labels)
    : index_(index),
      support_x_(std::move(support_x)),
      support_y_(std::move(support_y)),
      query_x_(std::move(query_x)),
      query_eval_labels_(std::move(query_eval_labels)) {
  if (support_x_.rank() != 2 || query_x_.rank() != 2) throw ShapeError("environment inputs must be matrices");
  if (support_x_.rows() != support_y_.size()) throw ShapeError("support rows and labels differ in count");
  if (query_x_.rows() != query_eval_labels_.size()) throw ShapeError("query rows and labels differ in count");
  if (query_x_.rows() > 0 && query_x_.cols() != support_x_.cols()) {
    throw ShapeError("support and query feature widths differ");
  }
}

std::vector<int> Environment::classes() const {
  std::set<int> s(support_y_.begin(), support_y_.end());
  return {s.begin(), s.end()};
}

Tensor sample_base(const StreamSpec& spec, std::size_t label, std::size_t n, Rng& rng) {
  if (label >= spec.num_classes) {
    throw DataError("class " + std::to_string(label) + " outside the " + std::to_string(spec.num_classes) +
                    "-class base distribution");
  }
  Tensor x = Tensor::matrix(n, 2);
  if (spec.base == BaseDistribution::moons) {
    const std::size_t pair = label / 2;
    const auto off = moon_pair_offset(pair, moon_pairs(spec));
    const bool upper = label % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double theta = kPi * rng.uniform();
      double px = upper ? std::cos(theta) : 1.0 - std::cos(theta);
      double py = upper ? std::sin(theta) : 0.5 - std::sin(theta);
      x(i, 0) = px - 0.5 + off[0];
      x(i, 1) = py - 0.25 + off[1];
    }
  } else {
    const auto c = blob_center(label, spec.num_classes);
    for (std::size_t i = 0; i < n; ++i) {
      x(i, 0) = c[0];
      x(i, 1) = c[1];
    }
  }
  if (spec.base_noise > 0.0) {
    for (double& v : x.values()) v += spec.base_noise * rng.normal();
  }
  return x;
}

Tensor apply_transform(const Tensor& x, const DomainTransform& t, Rng& rng) {
  if (x.rank() != 2 || x.cols() != 2) throw ShapeError("apply_transform needs a [n x 2] matrix, got " + condafr::to_string(x.shape()));
  const double c = std::cos(t.rotation);
  const double s = std::sin(t.rotation);
  Tensor out = Tensor::matrix(x.rows(), 2);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double px = x(i, 0);
    const double py = x(i, 1);
    out(i, 0) = t.scale * (c * px - s * py) + t.translation[0];
    out(i, 1) = t.scale * (s * px + c * py) + t.translation[1];
  }
  if (t.noise_std > 0.0) {
    for (double& v : out.values()) v += t.noise_std * rng.normal();
  }
  return out;
}

Stream build_scenario1(const StreamSpec& spec) {
  if (spec.scenario != Scenario::task_drift) throw ConfigError("stream.scenario", "build_scenario1 needs task_drift");
  spec.validate();
  Rng rng(spec.seed);
  Stream stream;
  for (std::size_t i = 0; i < spec.classes_per_task.size(); ++i) {
    const auto [first, last] = spec.label_range(i);
    stream.push_back(make_environment(spec, i, first, last, spec.transforms[0], spec.transforms[1], rng));
    stream.back().support_domain = 0;
    stream.back().query_domain = 1;
  }
  return stream;
}

Stream build_scenario2(const StreamSpec& spec) {
  if (spec.scenario != Scenario::domain_drift) throw ConfigError("stream.scenario", "build_scenario2 needs domain_drift");
  spec.validate();
  std::vector<std::size_t> order(spec.num_environments);
  std::iota(order.begin(), order.end(), std::size_t{1});
  if (spec.order != DifficultyOrder::as_given) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return spec.transforms[a].magnitude() < spec.transforms[b].magnitude();
    });
    if (spec.order == DifficultyOrder::descending) std::reverse(order.begin(), order.end());
  }
  Rng rng(spec.seed);
  Stream stream;
  const int classes = static_cast<int>(spec.num_classes);
  for (std::size_t i = 0; i < order.size(); ++i) {
    stream.push_back(make_environment(spec, i, 0, classes, spec.transforms[0], spec.transforms[order[i]], rng));
    stream.back().support_domain = 0;
    stream.back().query_domain = static_cast<int>(order[i]);
  }
  return stream;
}

Stream build_combined(const StreamSpec& spec, Rng& rng) {
  if (spec.scenario != Scenario::combined) throw ConfigError("stream.scenario", "build_combined needs combined");
  spec.validate();
  const std::size_t pool = spec.transforms.size();
  Stream stream;
  for (std::size_t i = 0; i < spec.classes_per_task.size(); ++i) {
    // Support domain uniform over the pool, query uniform over the rest.
    const std::size_t s = rng.index(pool);
    std::size_t q = rng.index(pool - 1);
    if (q >= s) ++q;
    const auto [first, last] = spec.label_range(i);
    stream.push_back(make_environment(spec, i, first, last, spec.transforms[s], spec.transforms[q], rng));
    stream.back().support_domain = static_cast<int>(s);
    stream.back().query_domain = static_cast<int>(q);
  }
  return stream;
}

Stream build_stream(const StreamSpec& spec) {
  switch (spec.scenario) {
    case Scenario::task_drift: return build_scenario1(spec);
    case Scenario::domain_drift: return build_scenario2(spec);
    case Scenario::combined: {
      Rng rng(spec.seed);
      return build_combined(spec, rng);
    }
  }
  throw ConfigError("stream.scenario", "unknown scenario");
}

void export_csv(const Stream& stream, std::ostream& out, const EvalAccess* access) {
  const std::size_t d = stream.empty() ? 0 : stream.front().input_dim();
  out << "env,role,label";
  for (std::size_t j = 0; j < d; ++j) out << ",f" << j;
  out << '\n';
  for (const Environment& env : stream) {
    if (env.input_dim() != d) throw ShapeError("environments disagree on feature width");
    for (std::size_t r = 0; r < env.support_x().rows(); ++r) {
      out << env.index() << ",support," << env.support_y()[r];
      for (double v : env.support_x().row(r)) out << ',' << format_double(v);
      out << '\n';
    }
    for (std::size_t r = 0; r < env.query_x().rows(); ++r) {
      out << env.index() << ",query," << (access ? env.query_labels(*access)[r] : -1);
      for (double v : env.query_x().row(r)) out << ',' << format_double(v);
      out << '\n';
    }
  }
}

void export_csv(const Stream& stream, const std::filesystem::path& path, const EvalAccess* access) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  export_csv(stream, out, access);
  if (!out) throw DataError("write to '" + path.string() + "' failed");
}

Stream ingest_csv(std::istream& in) {
  struct Rows {
    std::vector<double> sx, qx;
    std::vector<int> sy, qy;
    std::size_t first_query_line = 0;
  };
  std::map<std::size_t, Rows> envs;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (!have_header) {
      if (cells.size() < 4 || cells[0] != "env" || cells[1] != "role" || cells[2] != "label") {
        fail_row(line_no, "expected header 'env,role,label,f0,...'");
      }
      for (std::size_t j = 3; j < cells.size(); ++j) {
        if (cells[j] != "f" + std::to_string(j - 3)) fail_row(line_no, "feature column '" + cells[j] + "' out of order");
      }
      width = cells.size() - 3;
      have_header = true;
      continue;
    }
    if (cells.size() != width + 3) {
      fail_row(line_no, "expected " + std::to_string(width + 3) + " fields, got " + std::to_string(cells.size()));
    }
    std::size_t env = 0;
    int label = 0;
    if (!parse_number(cells[0], env)) fail_row(line_no, "bad env index '" + cells[0] + "'");
    if (!parse_number(cells[2], label)) fail_row(line_no, "bad label '" + cells[2] + "'");
    Rows& rows = envs[env];
    std::vector<double>* xs = nullptr;
    if (cells[1] == "support") {
      if (label < 0) fail_row(line_no, "support rows need a label");
      rows.sy.push_back(label);
      xs = &rows.sx;
    } else if (cells[1] == "query") {
      if (label < -1) fail_row(line_no, "query label must be -1 or a class index");
      rows.qy.push_back(label);
      if (!rows.first_query_line) rows.first_query_line = line_no;
      xs = &rows.qx;
    } else {
      fail_row(line_no, "role must be support or query, got '" + cells[1] + "'");
    }
    for (std::size_t j = 0; j < width; ++j) {
      double v = 0.0;
      if (!parse_number(cells[3 + j], v) || !std::isfinite(v)) fail_row(line_no, "bad feature value '" + cells[3 + j] + "'");
      xs->push_back(v);
    }
  }
  if (envs.empty()) throw DataError("no environments");
  Stream stream;
  std::size_t expected = 0;
  for (auto& [index, rows] : envs) {
    if (rows.sy.empty()) {
      fail_row(rows.first_query_line, "query rows for env " + std::to_string(index) + " without support rows");
    }
    if (index != expected) throw DataError("environment indices must be contiguous from 0; missing env " + std::to_string(expected));
    ++expected;
    Tensor sx({rows.sy.size(), width}, std::move(rows.sx));
    Tensor qx({rows.qy.size(), width}, std::move(rows.qx));
    stream.emplace_back(index, std::move(sx), std::move(rows.sy), std::move(qx), std::move(rows.qy));
  }
  return stream;
}

Stream ingest_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return ingest_csv(in);
}

}  // namespace condafr::streams
