#include "taskclust/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "taskclust/error.hpp"

namespace taskclust::io {

namespace {

[[noreturn]] void bad_format(const std::string &what) { throw Error("bad-format", what); }

std::string_view trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep)
{
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> lines_of(std::string_view text)
{
  std::vector<std::string_view> out;
  for (auto line : split(text, '\n'))
    if (!line.empty()) out.push_back(line);
  return out;
}

double parse_double(std::string_view s)
{
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    bad_format("not a finite number: '" + std::string(s) + "'");
  return v;
}

long long parse_int(std::string_view s)
{
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) bad_format("not an integer: '" + std::string(s) + "'");
  return v;
}

/// Parses the `#n=<int>` header and returns n along with the data lines.
int parse_header(std::vector<std::string_view> &lines)
{
  if (lines.empty() || !lines.front().starts_with("#n=")) bad_format("missing '#n=<int>' header");
  const auto n = parse_int(trim(lines.front().substr(3)));
  if (n < 1 || n > 1'000'000) bad_format("header n out of range");
  lines.erase(lines.begin());
  return static_cast<int>(n);
}

struct Triple {
  int i, j;
  std::string_view value;
};

Triple parse_triple(std::string_view line, int n)
{
  const auto f = split(line, ',');
  if (f.size() != 3) bad_format("expected 'i,j,value': '" + std::string(line) + "'");
  const auto i = parse_int(f[0]), j = parse_int(f[1]);
  if (i < 0 || j < 0 || i >= n || j >= n) bad_format("index out of range: '" + std::string(line) + "'");
  if (i == j) bad_format("diagonal entries are implied: '" + std::string(line) + "'");
  return {static_cast<int>(i), static_cast<int>(j), f[2]};
}

Json examples_json(std::span<const Example> data)
{
  Json out = Json::array();
  for (const auto &ex : data) out.push_back({{"x", std::vector<double>(ex.x.begin(), ex.x.end())}, {"y", ex.y}});
  return out;
}

std::vector<Example> examples_from(const Json &j)
{
  std::vector<Example> out;
  for (const auto &item : j) {
    const auto x = item.at("x").get<std::vector<double>>();
    Example ex;
    ex.x = Eigen::Map<const Vector>(x.data(), static_cast<Index>(x.size()));
    ex.y = item.at("y").get<int>();
    out.push_back(std::move(ex));
  }
  return out;
}

template <class F> auto guarded(const std::string &what, F &&f)
{
  try {
    return f();
  } catch (const Json::exception &e) {
    bad_format(what + ": " + e.what());
  }
}

} // namespace

std::string format_double(double v)
{
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("bad-format", "cannot format number");
  return std::string(buf, ptr);
}

std::string read_text(const fs::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing-input", path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path &path, const std::string &text)
{
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("bad-output", "cannot open " + path.string());
  out << text;
  if (!out.flush()) throw Error("bad-output", "write failed for " + path.string());
}

Json read_json(const fs::path &path)
{
  const auto text = read_text(path);
  return guarded(path.string(), [&] { return Json::parse(text); });
}

void write_json(const fs::path &path, const Json &j) { write_text(path, j.dump(2) + "\n"); }

Json to_json(const TaskDataset &task)
{
  return {{"task_id", task.task_id},
          {"label_count", task.label_count},
          {"splits",
           {{"train", examples_json(task.train)},
            {"valid", examples_json(task.valid)},
            {"test", examples_json(task.test)}}}};
}

TaskDataset task_from_json(const Json &j)
{
  auto task = guarded("task dataset", [&] {
    TaskDataset t;
    t.task_id = j.at("task_id").get<std::string>();
    t.label_count = j.at("label_count").get<int>();
    const auto &splits = j.at("splits");
    t.train = examples_from(splits.at("train"));
    t.valid = splits.contains("valid") ? examples_from(splits.at("valid")) : std::vector<Example>{};
    t.test = splits.contains("test") ? examples_from(splits.at("test")) : std::vector<Example>{};
    return t;
  });
  try {
    task.validate();
  } catch (const Error &e) {
    bad_format(task.task_id + ": " + e.what());
  }
  return task;
}

TaskDataset load_task(const fs::path &path) { return task_from_json(read_json(path)); }

void save_task(const fs::path &path, const TaskDataset &task) { write_json(path, to_json(task)); }

std::vector<TaskDataset> load_task_dir(const fs::path &dir)
{
  if (!fs::is_directory(dir)) throw Error("missing-input", dir.string());
  std::vector<fs::path> files;
  for (const auto &entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error("missing-input", "no task files in " + dir.string());
  std::vector<TaskDataset> tasks;
  for (const auto &f : files) tasks.push_back(load_task(f));
  return tasks;
}

std::string transfer_csv(const TransferMatrix &s)
{
  std::string out = "#n=" + std::to_string(s.n) + "\n";
  for (int i = 0; i < s.n; ++i)
    for (int j = 0; j < s.n; ++j)
      if (i != j && s.observed(i, j))
        out += std::to_string(i) + "," + std::to_string(j) + "," + format_double(s.scores(i, j)) + "\n";
  return out;
}

TransferMatrix parse_transfer_csv(const std::string &text)
{
  auto lines = lines_of(text);
  TransferMatrix s(parse_header(lines));
  for (auto line : lines) {
    const auto t = parse_triple(line, s.n);
    if (s.observed(t.i, t.j)) bad_format("duplicate entry: '" + std::string(line) + "'");
    const double v = parse_double(t.value);
    if (v < 0 || v > 1) bad_format("score outside [0, 1]: '" + std::string(line) + "'");
    s.set(t.i, t.j, v);
  }
  for (int i = 0; i < s.n; ++i)
    for (int j = i + 1; j < s.n; ++j)
      if (s.observed(i, j) != s.observed(j, i))
        bad_format("pair " + std::to_string(i) + "," + std::to_string(j) + " has only one direction");
  return s;
}

std::string partial_csv(const PartialSimilarityMatrix &y)
{
  std::string out = "#n=" + std::to_string(y.n()) + "\n";
  for (int i = 0; i < y.n(); ++i)
    for (int j = i + 1; j < y.n(); ++j)
      if (y.observed(i, j))
        out += std::to_string(i) + "," + std::to_string(j) + "," +
               (y.at(i, j) == Similarity::similar ? "1" : "0") + "\n";
  return out;
}

PartialSimilarityMatrix parse_partial_csv(const std::string &text)
{
  auto lines = lines_of(text);
  PartialSimilarityMatrix y(parse_header(lines));
  for (auto line : lines) {
    const auto t = parse_triple(line, y.n());
    if (y.observed(t.i, t.j)) bad_format("duplicate entry: '" + std::string(line) + "'");
    if (t.value == "1")
      y.set(t.i, t.j, Similarity::similar);
    else if (t.value == "0")
      y.set(t.i, t.j, Similarity::dissimilar);
    else
      bad_format("value must be 0 or 1: '" + std::string(line) + "'");
  }
  return y;
}

std::string dense_csv(const Matrix &m)
{
  std::string out;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
  return out;
}

Matrix parse_dense_csv(const std::string &text)
{
  const auto lines = lines_of(text);
  if (lines.empty()) bad_format("empty matrix");
  const auto cols = split(lines.front(), ',').size();
  Matrix m(static_cast<Index>(lines.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto f = split(lines[r], ',');
    if (f.size() != cols) bad_format("ragged row " + std::to_string(r));
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = parse_double(f[c]);
  }
  return m;
}

Json to_json(const TaskPartition &p)
{
  return {{"n", p.n}, {"K", p.k}, {"assignment", p.assignment}, {"seed", p.seed}};
}

TaskPartition partition_from_json(const Json &j)
{
  return guarded("partition", [&] {
    TaskPartition p;
    p.n = j.at("n").get<int>();
    p.k = j.at("K").get<int>();
    p.assignment = j.at("assignment").get<std::vector<int>>();
    p.seed = j.at("seed").get<std::uint64_t>();
    if (p.k < 1 || static_cast<int>(p.assignment.size()) != p.n) bad_format("partition shape");
    for (int a : p.assignment)
      if (a < 0 || a >= p.k) bad_format("assignment out of range");
    return p;
  });
}

Json to_json(const LinearMap &m)
{
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(m.weight.size()));
  for (Index r = 0; r < m.weight.rows(); ++r)
    for (Index c = 0; c < m.weight.cols(); ++c) w.push_back(m.weight(r, c));
  return {{"rows", m.weight.rows()},
          {"cols", m.weight.cols()},
          {"weight", w},
          {"bias", std::vector<double>(m.bias.begin(), m.bias.end())}};
}

LinearMap linear_map_from_json(const Json &j)
{
  return guarded("linear map", [&] {
    const auto rows = j.at("rows").get<Index>(), cols = j.at("cols").get<Index>();
    const auto w = j.at("weight").get<std::vector<double>>();
    const auto b = j.at("bias").get<std::vector<double>>();
    if (rows < 0 || cols < 0 || static_cast<Index>(w.size()) != rows * cols || static_cast<Index>(b.size()) != rows)
      bad_format("linear map shape");
    LinearMap m;
    m.weight.resize(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) m.weight(r, c) = w[static_cast<std::size_t>(r * cols + c)];
    m.bias = Eigen::Map<const Vector>(b.data(), rows);
    return m;
  });
}

Json to_json(const TaskModel &m)
{
  return {{"kind", "single_task"}, {"encoder", to_json(m.encoder)}, {"classifier", to_json(m.classifier)}};
}

TaskModel task_model_from_json(const Json &j)
{
  return guarded("task model", [&] {
    if (j.at("kind").get<std::string>() != "single_task") bad_format("expected kind single_task");
    TaskModel m;
    m.encoder = linear_map_from_json(j.at("encoder"));
    m.classifier = linear_map_from_json(j.at("classifier"));
    if (m.classifier.in_dim() != m.encoder.out_dim()) bad_format("encoder/classifier shapes disagree");
    return m;
  });
}

Json to_json(const ClusterModel &m)
{
  Json heads = Json::array();
  for (const auto &h : m.heads) heads.push_back(to_json(h));
  return {{"kind", to_string(m.kind)},
          {"cluster_id", m.cluster_id},
          {"task_ids", m.task_ids},
          {"encoder", to_json(m.encoder)},
          {"heads", heads}};
}

ClusterModel cluster_model_from_json(const Json &j)
{
  return guarded("cluster model", [&] {
    ClusterModel m;
    try {
      m.kind = cluster_model_kind_from(j.at("kind").get<std::string>());
    } catch (const Error &e) {
      bad_format(e.what());
    }
    m.cluster_id = j.at("cluster_id").get<int>();
    m.task_ids = j.at("task_ids").get<std::vector<std::string>>();
    m.encoder = linear_map_from_json(j.at("encoder"));
    for (const auto &h : j.at("heads")) m.heads.push_back(linear_map_from_json(h));
    for (const auto &h : m.heads)
      if (h.in_dim() != m.encoder.out_dim()) bad_format("head/encoder shapes disagree");
    return m;
  });
}

std::string sweep_csv(std::span<const SweepRow> rows)
{
  std::string out = "n,k,m1,m2,trials,recovered_count,prob\n";
  for (const auto &r : rows)
    out += std::to_string(r.n) + "," + std::to_string(r.k) + "," + std::to_string(r.m1) + "," + std::to_string(r.m2) +
           "," + std::to_string(r.trials) + "," + std::to_string(r.recovered_count) + "," + format_double(r.prob) +
           "\n";
  return out;
}

} // namespace taskclust::io
