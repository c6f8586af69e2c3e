/*
 * Copyright 2026 The hetfx Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "hetfx/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace hetfx {
namespace {

// RFC 4180 records: quoted fields may contain separators, doubled quotes and
// line breaks. Returns one vector of fields per record; blank lines are
// dropped.
std::vector<std::vector<std::string>> split_records(const std::string& text,
                                                    const std::string& source) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false, field_started = false;
  std::size_t i = 0;
  const std::size_t n = text.size();
  // Skip a UTF-8 byte order mark.
  if (text.compare(0, 3, "\xEF\xBB\xBF") == 0) i = 3;
  auto end_record = [&]() {
    fields.push_back(field);
    field.clear();
    field_started = false;
    const bool blank = fields.size() == 1 && fields[0].empty();
    if (!blank) records.push_back(std::move(fields));
    fields.clear();
  };
  for (; i < n; ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
      field_started = false;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < n && text[i + 1] == '\n') ++i;
      end_record();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (quoted) throw DataError(source + ": unterminated quoted field");
  if (field_started || !fields.empty()) end_record();
  return records;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& raw, double& out) {
  const std::string s = trim(raw);
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

Dataset::Dataset(std::vector<std::string> covariate_names, Eigen::MatrixXd x,
                 Eigen::VectorXd a, Eigen::VectorXd y, std::string treatment_name,
                 std::string outcome_name)
    : names_(std::move(covariate_names)),
      x_(std::move(x)),
      a_(std::move(a)),
      y_(std::move(y)),
      treatment_name_(std::move(treatment_name)),
      outcome_name_(std::move(outcome_name)) {
  if (static_cast<Index>(names_.size()) != x_.cols()) {
    throw ConfigError("dataset: " + std::to_string(names_.size()) +
                      " covariate names for " + std::to_string(x_.cols()) +
                      " columns");
  }
  if (a_.size() != x_.rows() || y_.size() != x_.rows()) {
    throw DataError("dataset: columns have unequal lengths");
  }
  std::set<std::string> seen{treatment_name_, outcome_name_};
  if (treatment_name_ == outcome_name_) {
    throw ConfigError("dataset: treatment and outcome share the name '" +
                      treatment_name_ + "'");
  }
  for (const auto& nm : names_) {
    if (!seen.insert(nm).second) {
      throw ConfigError("dataset: duplicate column name '" + nm + "'");
    }
  }
  for (Index i = 0; i < a_.size(); ++i) {
    if (a_(i) != 0.0 && a_(i) != 1.0) {
      throw DataError("dataset: treatment must be 0 or 1 (row " +
                      std::to_string(i + 1) + ")");
    }
  }
  if (!x_.allFinite() || !y_.allFinite()) {
    throw DataError("dataset: non-finite values");
  }
}

bool Dataset::has_covariate(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

Index Dataset::covariate_index(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) {
    throw ConfigError("unknown covariate column '" + name + "'");
  }
  return static_cast<Index>(it - names_.begin());
}

Eigen::VectorXd Dataset::column(const std::string& name) const {
  if (name == treatment_name_) return a_;
  if (name == outcome_name_) return y_;
  return x_.col(covariate_index(name));
}

Eigen::MatrixXd Dataset::columns(const std::vector<std::string>& names) const {
  Eigen::MatrixXd out(n(), static_cast<Index>(names.size()));
  for (std::size_t c = 0; c < names.size(); ++c) out.col(c) = column(names[c]);
  return out;
}

Dataset Dataset::with_covariate(const std::string& name,
                                const Eigen::VectorXd& values) const {
  if (values.size() != n()) {
    throw DataError("new column '" + name + "' has wrong length");
  }
  std::vector<std::string> names = names_;
  Eigen::MatrixXd x(n(), p() + 1);
  x.leftCols(p()) = x_;
  x.col(p()) = values;
  names.push_back(name);
  return Dataset(std::move(names), std::move(x), a_, y_, treatment_name_,
                 outcome_name_);
}

Dataset Dataset::select_rows(const std::vector<Index>& rows) const {
  return Dataset(names_, x_(rows, Eigen::all), a_(rows), y_(rows),
                 treatment_name_, outcome_name_);
}

Dataset parse_csv(const std::string& text, const Schema& schema,
                  const std::string& source) {
  const auto records = split_records(text, source);
  if (records.empty()) {
    throw ConfigError(source + ": empty file (a header row is required)");
  }
  std::vector<std::string> header;
  for (const auto& h : records[0]) header.push_back(trim(h));
  {
    std::set<std::string> uniq(header.begin(), header.end());
    if (uniq.size() != header.size()) {
      throw ConfigError(source + ": duplicate column names in header");
    }
  }
  auto find_col = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw ConfigError(source + ": missing column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t ta = find_col(schema.treatment);
  const std::size_t ty = find_col(schema.outcome);
  std::vector<std::string> cov_names = schema.covariates;
  if (cov_names.empty()) {
    for (const auto& h : header) {
      if (h != schema.treatment && h != schema.outcome) cov_names.push_back(h);
    }
  }
  std::vector<std::size_t> cov_idx;
  for (const auto& c : cov_names) {
    if (c == schema.treatment || c == schema.outcome) {
      throw ConfigError(source + ": column '" + c +
                        "' cannot be both a covariate and a role column");
    }
    cov_idx.push_back(find_col(c));
  }

  const auto n = static_cast<Index>(records.size() - 1);
  Eigen::MatrixXd x(n, static_cast<Index>(cov_idx.size()));
  Eigen::VectorXd a(n), y(n);
  std::vector<Index> bad_treatment;
  for (Index r = 0; r < n; ++r) {
    const auto& rec = records[r + 1];
    const std::string row = std::to_string(r + 1);
    if (rec.size() != header.size()) {
      throw DataError(source + ": row " + row + " has " +
                      std::to_string(rec.size()) + " fields, expected " +
                      std::to_string(header.size()));
    }
    auto cell = [&](std::size_t c) {
      double v = 0.0;
      if (!parse_double(rec[c], v)) {
        throw DataError(source + ": row " + row + ", column '" + header[c] +
                        "': missing, non-numeric or non-finite value '" +
                        rec[c] + "'");
      }
      return v;
    };
    for (std::size_t c = 0; c < cov_idx.size(); ++c) x(r, c) = cell(cov_idx[c]);
    a(r) = cell(ta);
    y(r) = cell(ty);
    if (a(r) != 0.0 && a(r) != 1.0) bad_treatment.push_back(r + 1);
  }
  if (!bad_treatment.empty()) {
    std::ostringstream os;
    os << source << ": treatment column '" << schema.treatment
       << "' must be 0 or 1; offending rows:";
    for (std::size_t i = 0; i < bad_treatment.size() && i < 20; ++i) {
      os << ' ' << bad_treatment[i];
    }
    if (bad_treatment.size() > 20) os << " ...";
    throw DataError(os.str());
  }
  return Dataset(std::move(cov_names), std::move(x), std::move(a), std::move(y),
                 schema.treatment, schema.outcome);
}

Dataset load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open input file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), schema, path);
}

std::string to_csv(const Dataset& data) {
  std::string out;
  for (const auto& nm : data.covariate_names()) out += csv_field(nm) + ",";
  out += csv_field(data.treatment_name()) + "," +
         csv_field(data.outcome_name()) + "\n";
  for (Index i = 0; i < data.n(); ++i) {
    for (Index c = 0; c < data.p(); ++c) out += format_double(data.x()(i, c)) + ",";
    out += format_double(data.a()(i)) + "," + format_double(data.y()(i)) + "\n";
  }
  return out;
}

void write_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << to_csv(data);
}

std::vector<Index> FoldAssignment::rows_in(int fold) const {
  std::vector<Index> rows;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) rows.push_back(static_cast<Index>(i));
  }
  return rows;
}

std::vector<Index> FoldAssignment::rows_out(int fold) const {
  std::vector<Index> rows;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) rows.push_back(static_cast<Index>(i));
  }
  return rows;
}

FoldAssignment assign_folds(Index n, int k, std::uint64_t seed) {
  FoldAssignment f;
  f.k = k;
  f.seed = seed;
  f.fold_of = shuffled_fold_ids(n, k, seed);
  return f;
}

ModifierSpec make_modifier_spec(const Dataset& data,
                                const std::vector<std::string>& names) {
  if (names.empty()) throw ConfigError("at least one effect modifier is required");
  ModifierSpec spec;
  std::set<std::string> seen;
  for (const auto& nm : names) {
    if (!seen.insert(nm).second) {
      throw ConfigError("modifier '" + nm + "' listed twice");
    }
    const Eigen::VectorXd col = data.x().col(data.covariate_index(nm));
    const bool binary =
        (col.array() == 0.0 || col.array() == 1.0).all();
    spec.names.push_back(nm);
    spec.kinds.push_back(binary ? ModifierKind::kBinary
                                : ModifierKind::kContinuous);
  }
  return spec;
}

RiskScoreResult derive_risk_score(const Dataset& data, double frac,
                                  std::uint64_t seed, const std::string& column) {
  if (!(frac > 0.0 && frac < 1.0)) {
    throw ConfigError("risk score: frac must lie in (0,1)");
  }
  const Eigen::VectorXd& y = data.y();
  if (!(y.array() == 0.0 || y.array() == 1.0).all()) {
    throw DataError("risk score: outcome must be binary");
  }
  if (data.has_covariate(column)) {
    throw ConfigError("risk score: column '" + column + "' already exists");
  }
  const Index n = data.n();
  const auto take = static_cast<Index>(std::llround(frac * static_cast<double>(n)));
  if (take < 2 || take >= n) {
    throw DataError("risk score: subsample size " + std::to_string(take) +
                    " is degenerate for n=" + std::to_string(n));
  }
  // Simple random sample via a seeded partial Fisher-Yates shuffle.
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng = make_rng(seed, 0x7269736bULL);
  for (Index i = 0; i < take; ++i) {
    const auto j = i + std::min<Index>(
                           static_cast<Index>(uniform01(rng) *
                                              static_cast<double>(n - i)),
                           n - i - 1);
    std::swap(order[i], order[j]);
  }
  std::vector<Index> sub(order.begin(), order.begin() + take);
  std::sort(sub.begin(), sub.end());
  std::vector<bool> in_sub(static_cast<std::size_t>(n), false);
  for (Index i : sub) in_sub[i] = true;
  std::vector<Index> rest;
  for (Index i = 0; i < n; ++i) {
    if (!in_sub[i]) rest.push_back(i);
  }

  const Eigen::VectorXd ys = y(sub);
  const double pos = ys.sum();
  if (pos == 0.0 || pos == static_cast<double>(take)) {
    throw DataError("risk score: the subsample contains only one outcome "
                    "class; cannot fit the risk model");
  }
  RiskScoreResult out;
  out.model = learners::logistic_irls(data.x()(sub, Eigen::all), ys);
  const Eigen::MatrixXd xr = data.x()(rest, Eigen::all);
  const Eigen::VectorXd& coef = out.model.coefficients;
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(xr.rows(), coef(0));
  if (coef.size() > 1) eta.noalias() += xr * coef.tail(coef.size() - 1);
  const Eigen::VectorXd risk = eta.unaryExpr(
      [](double e) { return std::clamp(expit(e), 1e-6, 1.0 - 1e-6); });
  out.data = data.select_rows(rest).with_covariate(column, risk);
  out.discarded = std::move(sub);
  return out;
}

Dataset residualize(const Dataset& data, const std::string& target,
                    const std::string& smooth_on, const std::string& by,
                    const std::vector<int>& m_grid) {
  const Eigen::VectorXd t = data.column(target);
  const Eigen::VectorXd s = data.column(smooth_on);
  const Eigen::VectorXd g = data.column(by);
  if (!(g.array() == 0.0 || g.array() == 1.0).all()) {
    throw DataError("residualize: grouping column '" + by + "' must be binary");
  }
  if (m_grid.empty()) throw ConfigError("residualize: empty basis grid");
  Eigen::VectorXd resid(data.n());
  for (double level : {0.0, 1.0}) {
    std::vector<Index> rows;
    for (Index i = 0; i < data.n(); ++i) {
      if (g(i) == level) rows.push_back(i);
    }
    if (rows.empty()) continue;
    const int min_m = *std::min_element(m_grid.begin(), m_grid.end());
    if (static_cast<Index>(rows.size()) < min_m + 1) {
      throw DataError("residualize: level " + std::to_string(int(level)) +
                      " of '" + by + "' has " + std::to_string(rows.size()) +
                      " rows, fewer than the basis dimension");
    }
    const auto sm = splines::smooth_spline(s(rows), t(rows), m_grid);
    resid(rows) = sm.fit.residuals;
  }
  return data.with_covariate(target + "_resid", resid);
}

}  // namespace hetfx
