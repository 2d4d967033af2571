#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "dynrisk/batch_io.hpp"

using namespace dynrisk;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "dynrisk_batch_io_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(BatchIo, BinaryRoundTripIsExact) {
  const auto b = simulate(TimeGrid(0.5, 3), 2, 64, 99);
  const auto path = scratch("paths.bin");
  write_batch(b, path, BatchFormat::Binary);
  EXPECT_TRUE(std::filesystem::exists(sidecar_path(path)));
  EXPECT_EQ(std::filesystem::file_size(path), 64u * 8 * 2 * sizeof(double));
  const auto r = read_batch(path, BatchFormat::Binary);
  EXPECT_TRUE(r == b);
}

TEST(BatchIo, CsvRoundTripIsExact) {
  const auto b = simulate(TimeGrid(1.0, 2), 1, 20, 3);
  const auto path = scratch("paths.csv");
  write_batch(b, path, BatchFormat::Csv);
  const auto r = read_batch(path, BatchFormat::Csv);
  EXPECT_TRUE(r == b);
}

TEST(BatchIo, SidecarNaming) { EXPECT_EQ(sidecar_path("x/paths.bin").string(), "x/paths.bin.json"); }

TEST(BatchIo, TruncatedDataIsRejected) {
  const auto b = simulate(TimeGrid(1.0, 2), 1, 20, 3);
  const auto path = scratch("short.bin");
  write_batch(b, path, BatchFormat::Binary);
  std::filesystem::resize_file(path, 100);
  EXPECT_THROW(read_batch(path, BatchFormat::Binary), std::exception);
}

TEST(BatchIo, MissingSidecarIsRejected) {
  const auto b = simulate(TimeGrid(1.0, 1), 1, 4, 3);
  const auto path = scratch("nosidecar.bin");
  write_batch(b, path, BatchFormat::Binary);
  std::filesystem::remove(sidecar_path(path));
  EXPECT_THROW(read_batch(path, BatchFormat::Binary), std::exception);
}
