#include "mifs/matrix_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mifs/error.hpp"

namespace mifs {

namespace {

void put_f32(std::ostream& out, double value) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  const unsigned char bytes[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                  static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

double get_f32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw IoError("truncated matrix payload");
  const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) | static_cast<std::uint32_t>(bytes[1]) << 8 |
                             static_cast<std::uint32_t>(bytes[2]) << 16 | static_cast<std::uint32_t>(bytes[3]) << 24;
  return static_cast<double>(std::bit_cast<float>(bits));
}

}  // namespace

void write_container(const std::filesystem::path& path, const MatrixContainer& container) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const nlohmann::json header{{"rows", container.data.rows()},
                              {"cols", container.data.cols()},
                              {"kind", container.kind},
                              {"levels", container.levels}};
  out << header.dump() << '\n';
  for (Eigen::Index r = 0; r < container.data.rows(); ++r)
    for (Eigen::Index c = 0; c < container.data.cols(); ++c) put_f32(out, container.data(r, c));
  if (container.kind == "DESC") {
    if (container.locations.size() != container.data.rows())
      throw ValidationError("descriptor container needs one location per row");
    for (Eigen::Index r = 0; r < container.locations.size(); ++r) put_f32(out, container.locations(r));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

MatrixContainer read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": missing header line");
  MatrixContainer container;
  try {
    const auto header = nlohmann::json::parse(line);
    container.kind = header.at("kind").get<std::string>();
    container.levels = header.at("levels").get<std::vector<int>>();
    const auto rows = header.at("rows").get<Eigen::Index>();
    const auto cols = header.at("cols").get<Eigen::Index>();
    if (rows < 0 || cols < 0) throw ValidationError("negative matrix shape");
    container.data.resize(rows, cols);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": malformed header: " + e.what());
  }
  for (Eigen::Index r = 0; r < container.data.rows(); ++r)
    for (Eigen::Index c = 0; c < container.data.cols(); ++c) container.data(r, c) = get_f32(in);
  if (container.kind == "DESC") {
    container.locations.resize(container.data.rows());
    for (Eigen::Index r = 0; r < container.locations.size(); ++r) container.locations(r) = get_f32(in);
  }
  return container;
}

void save_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& fm, bool observed) {
  MatrixContainer container;
  container.kind = observed ? "F" : "P";
  container.data = observed ? fm.f : fm.p;
  container.levels = fm.level_of_column;
  write_container(path, container);
}

void save_descriptor_set(const std::filesystem::path& path, const SeriesDescriptorSet& set) {
  write_container(path, MatrixContainer{"DESC", set.descriptors, set.level_of_row, set.locations});
}

SeriesDescriptorSet load_descriptor_set(const std::filesystem::path& path) {
  auto container = read_container(path);
  if (container.kind != "DESC") throw ValidationError(path.string() + ": expected kind DESC, got " + container.kind);
  return SeriesDescriptorSet{std::move(container.data), std::move(container.locations), std::move(container.levels)};
}

}  // namespace mifs
