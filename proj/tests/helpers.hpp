#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "invreg/dataset.hpp"

namespace testutil {

inline std::filesystem::path temp_dir() {
  static const std::filesystem::path dir = [] {
    auto d = std::filesystem::temp_directory_path() /
             ("invreg_tests_" + std::to_string(::getpid()));
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

inline std::string temp_path(const std::string& name) {
  return (temp_dir() / name).string();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

inline Eigen::MatrixXd make_matrix(
    std::initializer_list<std::initializer_list<double>> rows) {
  const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index c = static_cast<Eigen::Index>(rows.begin()->size());
  Eigen::MatrixXd m(r, c);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

inline Eigen::VectorXd make_vector(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

inline invreg::MultiEnvDataset make_dataset(
    std::initializer_list<std::initializer_list<double>> features,
    std::initializer_list<double> outcomes,  // NaN entries are unlabeled
    std::initializer_list<const char*> envs) {
  std::vector<invreg::EnvironmentId> env_ids;
  for (const char* e : envs) env_ids.emplace_back(e);
  Eigen::VectorXd y;
  if (outcomes.size() > 0) y = make_vector(outcomes);
  return invreg::MultiEnvDataset::from_rows(make_matrix(features), y, env_ids);
}

}  // namespace testutil
