#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "coarse/embed.hpp"
#include "coarse/kernel.hpp"
#include "coarse/pipeline.hpp"
#include "coarse/schur.hpp"

namespace coarse::io {

namespace fs = std::filesystem;

/// Shortest decimal string that parses back to the same double.
std::string format_double(double x);
/// Complex cells are written as "re+imj" / "re-imj".
std::string format_complex(std::complex<double> z);
double parse_double(const std::string& s);
std::complex<double> parse_complex(const std::string& s);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

/// Headerless square or rectangular matrix, one row per line.
void write_matrix_csv(const fs::path& path, const Eigen::MatrixXcd& m, bool real);
Eigen::MatrixXcd read_matrix_csv(const fs::path& path, bool* real = nullptr);

/// Kernel CSV plus a "<path>.json" sidecar {ball_hash, real, size, symmetric}.
void write_kernel(const fs::path& path, const Kernel& k);
/// With a ball, the sidecar hash (when present) must match it.
Kernel read_kernel(const fs::path& path, const BallPtr& ball = nullptr);

/// B, C, P, Q as "<stem>_{B,C,P,Q}.csv" plus "<stem>.json".
void write_certificate(const fs::path& dir, const std::string& stem,
                       const SchurCertificate& cert);
SchurCertificate read_certificate(const fs::path& json_path);

/// Columns index,normal_form,x0,x1,...
void write_embedding(const fs::path& path, const Embedding& u);
Embedding read_embedding(const fs::path& path, const BallPtr& ball);

/// Columns r,rho_minus,rho_plus,minus_empty,plus_empty.
void write_profile(const fs::path& path, const CompressionProfile& p);
CompressionProfile read_profile(const fs::path& path);

/// "<stem>_R.csv", "<stem>_S.csv" and "<stem>.json".
void write_split(const fs::path& dir, const std::string& stem, const SplitPair& pair);
SplitPair read_split(const fs::path& json_path, const BallPtr& ball = nullptr);

/// Sorted keys, two-space indent, numbers with 17 significant digits.
std::string render_json(const nlohmann::json& j);

nlohmann::json report_to_json(const PipelineReport& report);

enum class Format { kJson, kText };
std::string render_report(const PipelineReport& report, Format format);

}  // namespace coarse::io
