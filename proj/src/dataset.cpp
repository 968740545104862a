#include "invreg/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "invreg/linalg.hpp"

namespace invreg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_missing_token(const std::string& cell) {
  return cell.empty() || cell == "NA";
}

double parse_real_cell(const std::string& cell, std::size_t line,
                       const std::string& column) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw std::invalid_argument("CSV parse error at line " +
                                std::to_string(line) + ", column '" + column +
                                "': cannot parse '" + cell + "' as a real");
  }
  return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  cells.push_back(cell);
  return cells;
}

}  // namespace

MultiEnvDataset::MultiEnvDataset(Eigen::MatrixXd features,
                                 Eigen::VectorXd outcomes,
                                 std::vector<int> env_of_row,
                                 std::vector<EnvironmentId> registry)
    : features_(std::move(features)),
      outcomes_(std::move(outcomes)),
      env_of_row_(std::move(env_of_row)),
      registry_(std::move(registry)) {
  const Eigen::Index n = features_.rows();
  if (n < 1) throw std::invalid_argument("dataset needs at least one row");
  if (features_.cols() < 1)
    throw std::invalid_argument("dataset needs at least one feature column");
  if (!features_.allFinite())
    throw std::invalid_argument("dataset features must be finite");
  if (outcomes_.size() == 0)
    outcomes_ = Eigen::VectorXd::Constant(n, kNaN);
  if (outcomes_.size() != n)
    throw std::invalid_argument("outcome vector length must match row count");
  if (static_cast<Eigen::Index>(env_of_row_.size()) != n)
    throw std::invalid_argument("env_of_row length must match row count");
  if (registry_.empty())
    throw std::invalid_argument("environment registry is empty");

  std::unordered_set<std::string> seen;
  for (const auto& id : registry_) {
    if (id.empty())
      throw std::invalid_argument("environment ids must be non-empty");
    if (!seen.insert(id).second)
      throw std::invalid_argument("duplicate environment id: " + id);
  }

  rows_by_env_.assign(registry_.size(), {});
  for (Eigen::Index r = 0; r < n; ++r) {
    const int e = env_of_row_[r];
    if (e < 0 || e >= static_cast<int>(registry_.size()))
      throw std::invalid_argument("row references unknown environment index");
    rows_by_env_[e].push_back(static_cast<int>(r));
  }
  for (std::size_t e = 0; e < rows_by_env_.size(); ++e) {
    if (rows_by_env_[e].empty())
      throw std::invalid_argument("environment '" + registry_[e] +
                                  "' has no rows");
  }
}

MultiEnvDataset MultiEnvDataset::from_rows(
    Eigen::MatrixXd features, Eigen::VectorXd outcomes,
    const std::vector<EnvironmentId>& env_of_row) {
  std::vector<EnvironmentId> registry;
  std::unordered_map<std::string, int> index;
  std::vector<int> env_idx;
  env_idx.reserve(env_of_row.size());
  for (const auto& id : env_of_row) {
    auto it = index.find(id);
    if (it == index.end()) {
      it = index.emplace(id, static_cast<int>(registry.size())).first;
      registry.push_back(id);
    }
    env_idx.push_back(it->second);
  }
  return MultiEnvDataset(std::move(features), std::move(outcomes),
                         std::move(env_idx), std::move(registry));
}

bool MultiEnvDataset::is_labeled(Eigen::Index row) const {
  return std::isfinite(outcomes_[row]);
}

int MultiEnvDataset::env_index(const EnvironmentId& id) const {
  for (std::size_t i = 0; i < registry_.size(); ++i)
    if (registry_[i] == id) return static_cast<int>(i);
  return -1;
}

std::vector<EnvironmentId> MultiEnvDataset::labeled_environments() const {
  std::vector<EnvironmentId> out;
  for (std::size_t e = 0; e < registry_.size(); ++e) {
    for (int r : rows_by_env_[e]) {
      if (is_labeled(r)) {
        out.push_back(registry_[e]);
        break;
      }
    }
  }
  return out;
}

Eigen::Index MultiEnvDataset::labeled_count() const {
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < rows(); ++r)
    if (is_labeled(r)) ++k;
  return k;
}

Eigen::Index LabeledView::row_count() const {
  Eigen::Index k = 0;
  for (const auto& rows : rows_by_env) k += static_cast<Eigen::Index>(rows.size());
  return k;
}

Eigen::Index UnlabeledView::row_count() const {
  Eigen::Index k = 0;
  for (const auto& rows : rows_by_env) k += static_cast<Eigen::Index>(rows.size());
  return k;
}

MultiEnvDataset load_csv_dataset(const std::string& path,
                                 const ColumnSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open CSV file: " + path);

  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("CSV file is empty: " + path);
  const std::vector<std::string> header = split_csv_line(line);

  auto column_of = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  };

  const int env_col = column_of(schema.env_column);
  if (env_col < 0)
    throw std::invalid_argument("environment column '" + schema.env_column +
                                "' not found in CSV header");
  int outcome_col = -1;
  if (schema.outcome_column) {
    outcome_col = column_of(*schema.outcome_column);
    if (outcome_col < 0)
      throw std::invalid_argument("outcome column '" + *schema.outcome_column +
                                  "' not found in CSV header");
  }

  std::vector<int> feature_cols;
  std::vector<std::string> feature_names;
  if (schema.feature_columns.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (static_cast<int>(i) == env_col || static_cast<int>(i) == outcome_col)
        continue;
      feature_cols.push_back(static_cast<int>(i));
      feature_names.push_back(header[i]);
    }
  } else {
    for (const auto& name : schema.feature_columns) {
      const int c = column_of(name);
      if (c < 0)
        throw std::invalid_argument("feature column '" + name +
                                    "' not found in CSV header");
      feature_cols.push_back(c);
      feature_names.push_back(name);
    }
  }
  if (feature_cols.empty())
    throw std::invalid_argument("CSV schema yields zero feature columns");

  std::vector<double> features_flat;
  std::vector<double> outcomes;
  std::vector<EnvironmentId> envs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw std::invalid_argument(
          "CSV parse error at line " + std::to_string(line_no) + ": expected " +
          std::to_string(header.size()) + " cells, found " +
          std::to_string(cells.size()));
    }
    const std::string& env = cells[env_col];
    if (env.empty())
      throw std::invalid_argument("empty environment id at line " +
                                  std::to_string(line_no));
    envs.push_back(env);

    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
      const double v =
          parse_real_cell(cells[feature_cols[f]], line_no, feature_names[f]);
      if (!std::isfinite(v)) {
        throw std::invalid_argument("non-finite feature value at line " +
                                    std::to_string(line_no) + ", column '" +
                                    feature_names[f] + "'");
      }
      features_flat.push_back(v);
    }

    if (outcome_col >= 0) {
      const std::string& cell = cells[outcome_col];
      if (is_missing_token(cell)) {
        outcomes.push_back(kNaN);
      } else {
        const double y =
            parse_real_cell(cell, line_no, *schema.outcome_column);
        if (!std::isfinite(y)) {
          throw std::invalid_argument("non-finite outcome value at line " +
                                      std::to_string(line_no) + ", column '" +
                                      *schema.outcome_column + "'");
        }
        outcomes.push_back(y);
      }
    }
  }

  const Eigen::Index n = static_cast<Eigen::Index>(envs.size());
  if (n == 0) throw std::invalid_argument("CSV has no data rows: " + path);
  const Eigen::Index d = static_cast<Eigen::Index>(feature_cols.size());
  Eigen::MatrixXd features(n, d);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < d; ++c)
      features(r, c) = features_flat[static_cast<std::size_t>(r * d + c)];

  Eigen::VectorXd y;
  if (outcome_col >= 0) {
    y.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) y[r] = outcomes[r];
  }
  return MultiEnvDataset::from_rows(std::move(features), std::move(y), envs);
}

void write_csv_dataset(const std::string& path, const MultiEnvDataset& dataset,
                       const ColumnSchema& schema) {
  if (!schema.feature_columns.empty() &&
      static_cast<Eigen::Index>(schema.feature_columns.size()) != dataset.dim())
    throw std::invalid_argument("schema feature count does not match dataset");
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open for writing: " + path);

  out << schema.env_column;
  if (schema.outcome_column) out << ',' << *schema.outcome_column;
  for (Eigen::Index c = 0; c < dataset.dim(); ++c) {
    out << ',';
    if (schema.feature_columns.empty())
      out << "x" << (c + 1);
    else
      out << schema.feature_columns[c];
  }
  out << "\n";

  for (Eigen::Index r = 0; r < dataset.rows(); ++r) {
    out << dataset.environment(dataset.env_index_of_row(r));
    if (schema.outcome_column) {
      out << ',';
      if (dataset.is_labeled(r))
        out << format_double(dataset.outcomes()[r]);
      else
        out << "NA";
    }
    for (Eigen::Index c = 0; c < dataset.dim(); ++c)
      out << ',' << format_double(dataset.features()(r, c));
    out << "\n";
  }
  if (!out) throw std::invalid_argument("write failed: " + path);
}

std::pair<LabeledView, UnlabeledView> split_views(
    const MultiEnvDataset& dataset,
    const std::optional<std::vector<EnvironmentId>>& labeled_envs) {
  std::vector<int> chosen;
  if (labeled_envs) {
    for (const auto& id : *labeled_envs) {
      const int e = dataset.env_index(id);
      if (e < 0)
        throw std::invalid_argument("unknown environment: " + id);
      bool has_label = false;
      for (int r : dataset.rows_by_env()[e])
        if (dataset.is_labeled(r)) {
          has_label = true;
          break;
        }
      if (!has_label)
        throw std::invalid_argument("environment '" + id +
                                    "' has no labeled rows");
      chosen.push_back(e);
    }
    std::sort(chosen.begin(), chosen.end());
    chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
  } else {
    for (int e = 0; e < dataset.env_count(); ++e) {
      for (int r : dataset.rows_by_env()[e])
        if (dataset.is_labeled(r)) {
          chosen.push_back(e);
          break;
        }
    }
  }

  LabeledView labeled;
  if (chosen.empty()) {
    labeled.data = &dataset;  // dataset has no labels: the view is empty
  } else {
    labeled = make_labeled_view(dataset, chosen);
  }

  std::vector<int> all_envs(dataset.env_count());
  for (int e = 0; e < dataset.env_count(); ++e) all_envs[e] = e;
  UnlabeledView unlabeled = make_unlabeled_view(dataset, all_envs);
  return {std::move(labeled), std::move(unlabeled)};
}

LabeledView make_labeled_view(const MultiEnvDataset& dataset,
                              const std::vector<int>& env_subset) {
  std::vector<int> envs = env_subset;
  std::sort(envs.begin(), envs.end());
  envs.erase(std::unique(envs.begin(), envs.end()), envs.end());
  LabeledView view;
  view.data = &dataset;
  for (int e : envs) {
    if (e < 0 || e >= dataset.env_count())
      throw std::invalid_argument("environment index out of range");
    std::vector<int> rows;
    for (int r : dataset.rows_by_env()[e])
      if (dataset.is_labeled(r)) rows.push_back(r);
    if (rows.empty())
      throw std::invalid_argument("environment '" + dataset.environment(e) +
                                  "' has no labeled rows");
    view.env_indices.push_back(e);
    view.rows_by_env.push_back(std::move(rows));
  }
  if (view.env_indices.empty())
    throw std::invalid_argument("labeled view is empty");
  return view;
}

UnlabeledView make_unlabeled_view(const MultiEnvDataset& dataset,
                                  const std::vector<int>& env_subset) {
  std::vector<int> envs = env_subset;
  std::sort(envs.begin(), envs.end());
  envs.erase(std::unique(envs.begin(), envs.end()), envs.end());
  UnlabeledView view;
  view.data = &dataset;
  for (int e : envs) {
    if (e < 0 || e >= dataset.env_count())
      throw std::invalid_argument("environment index out of range");
    view.env_indices.push_back(e);
    view.rows_by_env.push_back(dataset.rows_by_env()[e]);
  }
  if (view.env_indices.empty())
    throw std::invalid_argument("unlabeled view is empty");
  return view;
}

MultiEnvDataset center_per_environment(const MultiEnvDataset& dataset) {
  Eigen::MatrixXd features = dataset.features();
  Eigen::VectorXd outcomes = dataset.outcomes();

  for (int e = 0; e < dataset.env_count(); ++e) {
    const auto& rows = dataset.rows_by_env()[e];
    const double inv_n = 1.0 / static_cast<double>(rows.size());

    // two subtraction passes keep the residual mean at rounding level
    for (int pass = 0; pass < 2; ++pass) {
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(dataset.dim());
      for (int r : rows) mean += features.row(r).transpose();
      mean *= inv_n;
      for (int r : rows) features.row(r) -= mean.transpose();
    }

    std::vector<int> labeled;
    for (int r : rows)
      if (dataset.is_labeled(r)) labeled.push_back(r);
    if (!labeled.empty()) {
      for (int pass = 0; pass < 2; ++pass) {
        double mean = 0.0;
        for (int r : labeled) mean += outcomes[r];
        mean /= static_cast<double>(labeled.size());
        for (int r : labeled) outcomes[r] -= mean;
      }
    }
  }

  return MultiEnvDataset(std::move(features), std::move(outcomes),
                         dataset.env_of_row(),
                         dataset.environments());
}

}  // namespace invreg
