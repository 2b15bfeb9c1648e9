#pragma once

#include <map>
#include <string>
#include <vector>

#include "prism/baselines.hpp"
#include "prism/common.hpp"
#include "prism/em.hpp"

namespace prism {

/// Plain-text matrix format: first line "rows cols" (two integers), then
/// `rows` lines of `cols` whitespace-separated decimal reals. Values are
/// written with 17 significant digits so round-trips are bit-exact. The same
/// format stores mixing matrices ("d k") and datasets ("N d").
void write_matrix_file(const std::string& path, const Matrix& m);
Matrix read_matrix_file(const std::string& path);

/// Small "key = value" manifests; one entry per line, '#' starts a comment.
using Manifest = std::map<std::string, std::string>;
void write_manifest(const std::string& path, const Manifest& manifest);
Manifest read_manifest(const std::string& path);

/// Renders a double with enough digits to round-trip exactly.
std::string format_double(double value);

/// Atomically replaces `path` (write to a temp file, then rename).
void atomic_write_file(const std::string& path, const std::string& content);

/// MetricRecord CSV, schema: method,seed,snr_db,n_samples,m_samples,mse
std::string metric_csv_header();
std::string metric_csv_row(const MetricRecord& rec);
std::vector<MetricRecord> parse_metric_csv(const std::string& content);
void write_metric_csv(const std::string& path, const std::vector<MetricRecord>& records);

/// EM trajectory CSV, schema: iteration,q_value,mean_ess,h_frobenius_change
void write_trajectory_csv(const std::string& path, const std::vector<EmIterationRecord>& trace);
std::vector<EmIterationRecord> parse_trajectory_csv(const std::string& content);

std::string read_text_file(const std::string& path);

}  // namespace prism
