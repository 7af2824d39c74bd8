#include "survenet/survival_core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace survenet {

void SurvivalDataset::validate() const {
  if (times.size() == 0) throw InputError("empty input");
  if (status.size() != times.size() || covariates.rows() != times.size())
    throw InputError("dimension mismatch: times, status and covariates must have the same rows");
  for (Index i = 0; i < status.size(); ++i)
    if (status(i) != 0 && status(i) != 1) throw InputError("invalid status");
  if (!times.allFinite() || !covariates.allFinite()) throw InputError("non-finite values in dataset");
  if (!names.empty() && static_cast<Index>(names.size()) != covariates.cols())
    throw InputError("covariate name count does not match column count");
}

SurvivalDataset SurvivalDataset::subset(const IndexSet& rows) const {
  SurvivalDataset out;
  out.times = select_rows(times, rows);
  out.status.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out.status(static_cast<Index>(i)) = status(rows[i]);
  out.covariates = select_rows(covariates, rows);
  out.names = names;
  return out;
}

IndexSet time_order(const SurvivalDataset& data) {
  IndexSet order(static_cast<std::size_t>(data.n()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (data.times(a) != data.times(b)) return data.times(a) < data.times(b);
    return data.status(a) > data.status(b);
  });
  return order;
}

SurvivalDataset sorted_by_time(const SurvivalDataset& data) {
  return data.subset(time_order(data));
}

bool is_time_sorted(const SurvivalDataset& data) {
  for (Index i = 1; i < data.n(); ++i) {
    if (data.times(i) < data.times(i - 1)) return false;
    if (data.times(i) == data.times(i - 1) && data.status(i) > data.status(i - 1)) return false;
  }
  return true;
}

KMWeightVector compute_km_weights(const SurvivalDataset& data) {
  data.validate();
  const IndexSet order = time_order(data);
  const Index n = data.n();
  KMWeightVector out;
  out.weights = Vector::Zero(n);
  // survival holds prod_{j<i} ((n-j)/(n-j+1))^delta_(j) with 1-based j
  double survival = 1.0;
  for (Index i = 0; i < n; ++i) {
    const double at_risk = static_cast<double>(n - i);
    const int delta = data.status(order[static_cast<std::size_t>(i)]);
    out.weights(i) = delta / at_risk * survival;
    if (delta == 1) survival *= (at_risk - 1.0) / at_risk;
  }
  return out;
}

SurvivalDataset efron_tail_correction(const SurvivalDataset& data) {
  data.validate();
  SurvivalDataset out = data;
  const IndexSet order = time_order(data);
  const Index last = order.back();
  if (out.status(last) == 0) out.status(last) = 1;
  return out;
}

namespace {

StandardizedData standardize_impl(const SurvivalDataset& sorted, const KMWeightVector& km) {
  StandardizedData s;
  s.source = sorted;
  s.weights = km;
  const double total = km.sum();
  if (!(total > 0.0)) throw InputError("degenerate weights");
  const Vector& w = km.weights;
  s.x_means = (sorted.covariates.transpose() * w) / total;
  s.y_mean = w.dot(sorted.times) / total;

  const Index n = sorted.n();
  const Vector root_w = w.cwiseSqrt();
  Matrix centred_x = sorted.covariates.rowwise() - s.x_means.transpose();
  Vector centred_y = sorted.times.array() - s.y_mean;
  s.x_std = root_w.asDiagonal() * centred_x;
  s.y_std = root_w.cwiseProduct(centred_y);

  for (Index i = 0; i < n; ++i) {
    if (sorted.status(i) == 1)
      s.uncensored_index.push_back(i);
    else
      s.censored_index.push_back(i);
  }
  s.x_censored = select_rows(centred_x, s.censored_index);
  s.y_censored = select_rows(centred_y, s.censored_index);
  return s;
}

}  // namespace

StandardizedData weighted_standardize(const SurvivalDataset& sorted_data,
                                      const KMWeightVector& weights) {
  sorted_data.validate();
  if (!is_time_sorted(sorted_data)) throw InputError("weighted_standardize requires time-sorted data");
  if (weights.size() != sorted_data.n()) throw InputError("weight vector length does not match data");
  return standardize_impl(sorted_data, weights);
}

StandardizedData prepare(const SurvivalDataset& data) {
  SurvivalDataset sorted = sorted_by_time(efron_tail_correction(data));
  KMWeightVector km = compute_km_weights(sorted);
  return weighted_standardize(sorted, km);
}

StandardizedData StandardizedData::subset(const IndexSet& rows) const {
  StandardizedData s;
  s.source = source.subset(rows);
  s.weights.weights = select_rows(weights.weights, rows);
  s.x_std = select_rows(x_std, rows);
  s.y_std = select_rows(y_std, rows);
  s.x_means = x_means;
  s.y_mean = y_mean;
  IndexSet cens_rows;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Index i = rows[k];
    if (source.status(i) == 1) {
      s.uncensored_index.push_back(static_cast<Index>(k));
    } else {
      s.censored_index.push_back(static_cast<Index>(k));
      cens_rows.push_back(i);
    }
  }
  Matrix centred_x = source.covariates.rowwise() - x_means.transpose();
  Vector centred_y = source.times.array() - y_mean;
  s.x_censored = select_rows(centred_x, cens_rows);
  s.y_censored = select_rows(centred_y, cens_rows);
  return s;
}

StandardizedData StandardizedData::restrict_columns(const IndexSet& cols) const {
  StandardizedData s = *this;
  s.source.covariates = select_cols(source.covariates, cols);
  if (!source.names.empty()) {
    s.source.names.clear();
    for (Index j : cols) s.source.names.push_back(source.names[static_cast<std::size_t>(j)]);
  }
  s.x_std = select_cols(x_std, cols);
  s.x_censored = select_cols(x_censored, cols);
  s.x_means = select_rows(x_means, cols);
  return s;
}

double recover_intercept(const Vector& beta, const StandardizedData& std_data) {
  if (beta.size() != std_data.p()) throw InputError("recover_intercept: dimension mismatch");
  return std_data.y_mean - std_data.x_means.dot(beta);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim whitespace and a trailing carriage return
    auto b = field.find_first_not_of(" \t\r");
    auto e = field.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_number(const std::string& s, std::size_t line, const std::string& column) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size() || !std::isfinite(v))
    throw InputError("line " + std::to_string(line) + ": column '" + column + "': invalid number '" + s + "'");
  return v;
}

}  // namespace

SurvivalDataset parse_survival_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      header = split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw InputError("empty input");
  if (header[0].size() >= 3 && header[0].compare(0, 3, "\xEF\xBB\xBF") == 0) header[0].erase(0, 3);

  Index time_col = -1, status_col = -1;
  std::vector<Index> cov_cols;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "time") {
      time_col = static_cast<Index>(c);
    } else if (header[c] == "status") {
      status_col = static_cast<Index>(c);
    } else {
      cov_cols.push_back(static_cast<Index>(c));
      names.push_back(header[c]);
    }
  }
  if (time_col < 0) throw InputError("line " + std::to_string(line_no) + ": missing 'time' column");
  if (status_col < 0) throw InputError("line " + std::to_string(line_no) + ": missing 'status' column");

  std::vector<double> times;
  std::vector<int> status;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw InputError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                       " fields, found " + std::to_string(fields.size()));
    const double t = parse_number(fields[static_cast<std::size_t>(time_col)], line_no, "time");
    if (!(t > 0.0)) throw InputError("line " + std::to_string(line_no) + ": time must be positive");
    const std::string& st = fields[static_cast<std::size_t>(status_col)];
    if (st != "0" && st != "1")
      throw InputError("line " + std::to_string(line_no) + ": invalid status '" + st + "' (expected 0 or 1)");
    times.push_back(std::log(t));
    status.push_back(st == "1" ? 1 : 0);
    std::vector<double> row;
    row.reserve(cov_cols.size());
    for (std::size_t k = 0; k < cov_cols.size(); ++k)
      row.push_back(parse_number(fields[static_cast<std::size_t>(cov_cols[k])], line_no, names[k]));
    rows.push_back(std::move(row));
  }
  if (times.empty()) throw InputError("empty input");

  SurvivalDataset data;
  const Index n = static_cast<Index>(times.size());
  const Index p = static_cast<Index>(cov_cols.size());
  data.times = Eigen::Map<const Vector>(times.data(), n);
  data.status = Eigen::Map<const Eigen::VectorXi>(status.data(), n);
  data.covariates.resize(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) data.covariates(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  data.names = std::move(names);
  data.validate();
  return data;
}

SurvivalDataset read_survival_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return parse_survival_csv(in);
}

void write_survival_csv(const SurvivalDataset& data, std::ostream& out) {
  data.validate();
  out << "time,status";
  for (Index j = 0; j < data.p(); ++j) {
    out << ',';
    if (!data.names.empty())
      out << data.names[static_cast<std::size_t>(j)];
    else
      out << 'x' << (j + 1);
  }
  out << '\n';
  out << std::setprecision(17);
  for (Index i = 0; i < data.n(); ++i) {
    out << std::exp(data.times(i)) << ',' << data.status(i);
    for (Index j = 0; j < data.p(); ++j) out << ',' << data.covariates(i, j);
    out << '\n';
  }
}

}  // namespace survenet
