#include "coarse/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "coarse/errors.hpp"

namespace coarse::io {

namespace {

using Eigen::Index;
using nlohmann::json;

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

Eigen::MatrixXd read_real_csv(const fs::path& path) {
  bool real = true;
  const Eigen::MatrixXcd m = read_matrix_csv(path, &real);
  if (!real) throw IoError(path.string() + ": expected real values");
  return m.real();
}

std::string sibling(const fs::path& json_path, const std::string& name) {
  return (json_path.parent_path() / name).string();
}

void render(const json& j, std::string& out, int indent) {
  const std::string pad(2 * (indent + 1), ' ');
  const std::string close(2 * indent, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map: sorted keys
        if (!first) out += ",\n";
        first = false;
        out += pad + json(it.key()).dump() + ": ";
        render(it.value(), out, indent + 1);
      }
      out += "\n" + close + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        render(j[i], out, indent + 1);
      }
      out += "\n" + close + "]";
      return;
    }
    case json::value_t::number_float: {
      const double x = j.get<double>();
      if (!std::isfinite(x)) {
        out += "null";
        return;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", x);
      std::string s = buf;
      if (s.find_first_of(".eE") == std::string::npos) s += ".0";
      out += s;
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string format_complex(std::complex<double> z) {
  std::string im = format_double(z.imag());
  if (im.front() != '-') im = "+" + im;
  return format_double(z.real()) + im + "j";
}

double parse_double(const std::string& s) {
  double x = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && *b == ' ') ++b;
  while (e > b && e[-1] == ' ') --e;
  if (b < e && *b == '+') ++b;
  const auto res = std::from_chars(b, e, x);
  if (res.ec != std::errc() || res.ptr != e) {
    throw IoError("cannot parse number '" + s + "'");
  }
  return x;
}

std::complex<double> parse_complex(const std::string& s) {
  if (s.empty() || (s.back() != 'j' && s.back() != 'i')) return {parse_double(s), 0.0};
  const std::string body = s.substr(0, s.size() - 1);
  for (std::size_t k = body.size(); k-- > 1;) {
    const char c = body[k];
    if ((c == '+' || c == '-') && body[k - 1] != 'e' && body[k - 1] != 'E') {
      return {parse_double(body.substr(0, k)), parse_double(body.substr(k))};
    }
  }
  return {0.0, parse_double(body)};
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void write_matrix_csv(const fs::path& path, const Eigen::MatrixXcd& m, bool real) {
  std::string text;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) text += ',';
      text += real ? format_double(m(i, j).real()) : format_complex(m(i, j));
    }
    text += '\n';
  }
  write_text(path, text);
}

Eigen::MatrixXcd read_matrix_csv(const fs::path& path, bool* real) {
  const auto rows = lines_of(read_text(path));
  std::vector<std::vector<std::complex<double>>> cells;
  bool all_real = true;
  for (const auto& line : rows) {
    std::vector<std::complex<double>> row;
    for (const auto& c : split_line(line)) {
      const auto z = parse_complex(c);
      if (z.imag() != 0.0) all_real = false;
      row.push_back(z);
    }
    if (!cells.empty() && row.size() != cells.front().size()) {
      throw IoError(path.string() + ": ragged rows");
    }
    cells.push_back(std::move(row));
  }
  const Index r = static_cast<Index>(cells.size());
  const Index c = r ? static_cast<Index>(cells.front().size()) : 0;
  Eigen::MatrixXcd m(r, c);
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < c; ++j) m(i, j) = cells[i][j];
  }
  if (real) *real = all_real;
  return m;
}

void write_kernel(const fs::path& path, const Kernel& k) {
  write_matrix_csv(path, k.values(), k.is_real());
  json side = {{"real", k.is_real()},
               {"size", k.size()},
               {"symmetric", k.is_symmetric()},
               {"ball_hash", k.ball() ? json(ball_hash(*k.ball())) : json(nullptr)}};
  write_text(path.string() + ".json", render_json(side) + "\n");
}

Kernel read_kernel(const fs::path& path, const BallPtr& ball) {
  bool real = true;
  Eigen::MatrixXcd m = read_matrix_csv(path, &real);
  if (m.rows() != m.cols()) throw IoError(path.string() + ": kernel is not square");
  const fs::path side = path.string() + ".json";
  if (ball && fs::exists(side)) {
    const json j = read_json(side);
    if (j.contains("ball_hash") && j["ball_hash"].is_string() &&
        j["ball_hash"].get<std::string>() != ball_hash(*ball)) {
      throw IoError(path.string() + ": kernel was written for a different ball");
    }
  }
  if (ball && static_cast<std::size_t>(m.rows()) != ball->size()) {
    throw IoError(path.string() + ": kernel size does not match the ball");
  }
  return real ? Kernel::real(m.real(), ball) : Kernel::complex(std::move(m), ball);
}

void write_certificate(const fs::path& dir, const std::string& stem,
                       const SchurCertificate& cert) {
  const std::string names[] = {"B", "C", "P", "Q"};
  const Eigen::MatrixXcd* mats[] = {&cert.B, &cert.C, &cert.P, &cert.Q};
  json j = {{"bound", cert.bound},
            {"residual", cert.residual},
            {"delta", cert.delta},
            {"real", cert.real}};
  for (int k = 0; k < 4; ++k) {
    const std::string file = stem + "_" + names[k] + ".csv";
    write_matrix_csv(dir / file, *mats[k], cert.real);
    j[names[k] + "_path"] = file;
  }
  write_text(dir / (stem + ".json"), render_json(j) + "\n");
}

SchurCertificate read_certificate(const fs::path& json_path) {
  const json j = read_json(json_path);
  SchurCertificate c;
  try {
    c.bound = j.at("bound").get<double>();
    c.residual = j.at("residual").get<double>();
    c.delta = j.at("delta").get<double>();
    c.real = j.at("real").get<bool>();
    c.B = read_matrix_csv(sibling(json_path, j.at("B_path").get<std::string>()));
    c.C = read_matrix_csv(sibling(json_path, j.at("C_path").get<std::string>()));
    c.P = read_matrix_csv(sibling(json_path, j.at("P_path").get<std::string>()));
    c.Q = read_matrix_csv(sibling(json_path, j.at("Q_path").get<std::string>()));
  } catch (const json::exception& e) {
    throw IoError(json_path.string() + ": " + e.what());
  }
  c.phi = c.P * c.Q.adjoint();
  return c;
}

void write_embedding(const fs::path& path, const Embedding& u) {
  std::string text = "index,normal_form";
  for (Index c = 0; c < u.dimension(); ++c) text += ",x" + std::to_string(c);
  text += '\n';
  for (Index i = 0; i < u.size(); ++i) {
    text += std::to_string(i) + ",";
    if (u.ball) text += format_element(u.ball->spec, u.ball->points[i]);
    for (Index c = 0; c < u.dimension(); ++c) text += "," + format_double(u.coords(i, c));
    text += '\n';
  }
  write_text(path, text);
}

Embedding read_embedding(const fs::path& path, const BallPtr& ball) {
  const auto rows = lines_of(read_text(path));
  if (rows.empty()) throw IoError(path.string() + ": missing header");
  const auto header = split_line(rows.front());
  if (header.size() < 2 || header[0] != "index" || header[1] != "normal_form") {
    throw IoError(path.string() + ": bad embedding header");
  }
  const Index dim = static_cast<Index>(header.size()) - 2;
  Embedding u;
  u.ball = ball;
  u.provenance = Provenance::kExternal;
  u.coords = Eigen::MatrixXd(static_cast<Index>(rows.size()) - 1, dim);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto cells = split_line(rows[r]);
    if (cells.size() != header.size()) throw IoError(path.string() + ": ragged rows");
    for (Index c = 0; c < dim; ++c) u.coords(r - 1, c) = parse_double(cells[c + 2]);
    if (ball && r - 1 < ball->size() &&
        cells[1] != format_element(ball->spec, ball->points[r - 1])) {
      throw IoError(path.string() + ": normal form mismatch at row " + std::to_string(r));
    }
  }
  if (ball && static_cast<std::size_t>(u.coords.rows()) != ball->size()) {
    throw IoError(path.string() + ": embedding size does not match the ball");
  }
  return u;
}

void write_profile(const fs::path& path, const CompressionProfile& p) {
  std::string text = "r,rho_minus,rho_plus,minus_empty,plus_empty\n";
  for (const auto& r : p.rows) {
    text += std::to_string(r.r) + "," + format_double(r.rho_minus) + "," +
            format_double(r.rho_plus) + "," + (r.minus_empty ? "1" : "0") + "," +
            (r.plus_empty ? "1" : "0") + "\n";
  }
  write_text(path, text);
}

CompressionProfile read_profile(const fs::path& path) {
  const auto rows = lines_of(read_text(path));
  if (rows.empty() || rows.front() != "r,rho_minus,rho_plus,minus_empty,plus_empty") {
    throw IoError(path.string() + ": bad profile header");
  }
  CompressionProfile p;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto c = split_line(rows[k]);
    if (c.size() != 5) throw IoError(path.string() + ": ragged rows");
    CompressionRow r;
    r.r = static_cast<int>(parse_double(c[0]));
    r.rho_minus = parse_double(c[1]);
    r.rho_plus = parse_double(c[2]);
    r.minus_empty = c[3] == "1";
    r.plus_empty = c[4] == "1";
    p.rows.push_back(r);
  }
  p.radius = p.rows.empty() ? 0 : p.rows.back().r / 2;
  return p;
}

void write_split(const fs::path& dir, const std::string& stem, const SplitPair& pair) {
  write_matrix_csv(dir / (stem + "_R.csv"), pair.R.cast<std::complex<double>>(), true);
  write_matrix_csv(dir / (stem + "_S.csv"), pair.S.cast<std::complex<double>>(), true);
  json j = {{"n", pair.n},
            {"approx_error_bound", pair.approx_error_bound},
            {"max_S_row_norm", pair.max_s_row_norm},
            {"normalization_perturbation", pair.normalization_perturbation},
            {"stage_error", pair.stage_error},
            {"R_path", stem + "_R.csv"},
            {"S_path", stem + "_S.csv"}};
  write_text(dir / (stem + ".json"), render_json(j) + "\n");
}

SplitPair read_split(const fs::path& json_path, const BallPtr& ball) {
  const json j = read_json(json_path);
  SplitPair p;
  try {
    p.n = j.at("n").get<int>();
    p.approx_error_bound = j.at("approx_error_bound").get<double>();
    p.max_s_row_norm = j.at("max_S_row_norm").get<double>();
    p.normalization_perturbation = j.value("normalization_perturbation", 0.0);
    p.stage_error = j.value("stage_error", 0.0);
    p.R = read_real_csv(sibling(json_path, j.at("R_path").get<std::string>()));
    p.S = read_real_csv(sibling(json_path, j.at("S_path").get<std::string>()));
  } catch (const json::exception& e) {
    throw IoError(json_path.string() + ": " + e.what());
  }
  p.ball = ball;
  return p;
}

std::string render_json(const json& j) {
  std::string out;
  render(j, out, 0);
  return out;
}

json report_to_json(const PipelineReport& report) {
  json stages = json::array();
  for (const auto& s : report.stages) {
    json checks = json::array();
    for (const auto& c : s.checks) {
      checks.push_back({{"name", c.name},
                        {"passed", c.passed},
                        {"value", c.value},
                        {"threshold", c.threshold}});
    }
    json st = {{"name", s.name},
               {"status", to_string(s.status)},
               {"checks", std::move(checks)},
               {"details", s.details}};
    if (!s.error.empty()) st["error"] = s.error;
    stages.push_back(std::move(st));
  }
  return {{"stages", std::move(stages)},
          {"overall", to_string(report.overall)},
          {"reasons", report.reasons},
          {"meta", report.meta}};
}

std::string render_report(const PipelineReport& report, Format format) {
  if (format == Format::kJson) return render_json(report_to_json(report)) + "\n";
  std::ostringstream out;
  for (const auto& s : report.stages) {
    out << to_string(s.status) << "  " << s.name;
    if (!s.error.empty()) out << "  (" << s.error << ")";
    out << "\n";
    for (const auto& c : s.checks) {
      if (!c.passed) out << "      " << c.name << ": " << c.value << " vs " << c.threshold << "\n";
    }
  }
  for (const auto& r : report.reasons) out << "  - " << r << "\n";
  std::string last;
  for (const auto& s : report.stages) {
    if (s.status == Verdict::kFail) {
      last = s.name;
      break;
    }
  }
  out << "overall: " << to_string(report.overall);
  if (!last.empty()) out << " at stage " << last;
  out << "\n";
  if (report.overall == Verdict::kFail) out << "FAIL " << last << "\n";
  return out.str();
}

}  // namespace coarse::io
