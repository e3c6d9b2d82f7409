#pragma once

// Binary matrix container: one JSON header line
//   {"rows":R,"cols":C,"kind":"P"|"F"|"DESC"|...,"levels":[...]}
// followed by R*C little-endian float32 values in row-major order. Kind
// "DESC" appends R float32 locations after the matrix.

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mifs/skipstack.hpp"

namespace mifs {

struct MatrixContainer {
  std::string kind;
  Eigen::MatrixXd data;
  std::vector<int> levels;
  Eigen::VectorXd locations;  // only for kind "DESC"
};

void write_container(const std::filesystem::path& path, const MatrixContainer& container);
MatrixContainer read_container(const std::filesystem::path& path);

void save_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& fm, bool observed);
void save_descriptor_set(const std::filesystem::path& path, const SeriesDescriptorSet& set);
SeriesDescriptorSet load_descriptor_set(const std::filesystem::path& path);

}  // namespace mifs
