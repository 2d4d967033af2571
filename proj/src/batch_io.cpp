#include "dynrisk/batch_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dynrisk {

namespace {

static_assert(std::endian::native == std::endian::little, "binary batch format assumes a little-endian host");

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& data_path) {
  return std::filesystem::path(data_path.string() + ".json");
}

void write_batch(const BrownianBatch& batch, const std::filesystem::path& data_path, BatchFormat format) {
  const auto data = batch.data();
  if (format == BatchFormat::Binary) {
    std::ofstream out(data_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + data_path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
  } else {
    std::ofstream out(data_path);
    if (!out) throw std::runtime_error("cannot open " + data_path.string() + " for writing");
    const std::size_t row = batch.row_size();
    for (std::size_t c = 0; c < row; ++c) {
      // Header names are dW_<cell>_<dim>.
      out << (c ? "," : "") << "dW_" << c / batch.dimension() << '_' << c % batch.dimension();
    }
    out << "\r\n";
    for (std::size_t m = 0; m < batch.samples(); ++m) {
      for (std::size_t c = 0; c < row; ++c) out << (c ? "," : "") << format_double(data[m * row + c]);
      out << "\r\n";
    }
  }
  nlohmann::json meta = {{"T", batch.grid().horizon()},
                         {"n", batch.grid().levels()},
                         {"d", batch.dimension()},
                         {"M", batch.samples()},
                         {"seed", batch.seed()},
                         {"format", format == BatchFormat::Binary ? "binary" : "csv"},
                         {"layout", "row per path, columns cell-major then dimension"}};
  std::ofstream side(sidecar_path(data_path));
  if (!side) throw std::runtime_error("cannot write sidecar for " + data_path.string());
  side << meta.dump(2) << '\n';
}

BrownianBatch read_batch(const std::filesystem::path& data_path, BatchFormat format) {
  std::ifstream side(sidecar_path(data_path));
  if (!side) throw std::runtime_error("missing sidecar " + sidecar_path(data_path).string());
  const auto meta = nlohmann::json::parse(side);
  const TimeGrid grid(meta.at("T").get<double>(), meta.at("n").get<unsigned>());
  const auto d = meta.at("d").get<std::size_t>();
  const auto m = meta.at("M").get<std::size_t>();
  const auto seed = meta.at("seed").get<std::uint64_t>();
  const std::size_t row = grid.cells() * d;
  std::vector<double> inc(m * row);
  if (format == BatchFormat::Binary) {
    std::ifstream in(data_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + data_path.string());
    in.read(reinterpret_cast<char*>(inc.data()), static_cast<std::streamsize>(inc.size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(inc.size() * sizeof(double)))
      throw std::runtime_error(data_path.string() + ": truncated batch file");
  } else {
    std::ifstream in(data_path);
    if (!in) throw std::runtime_error("cannot open " + data_path.string());
    std::string line;
    std::getline(in, line);  // header
    for (std::size_t i = 0; i < m; ++i) {
      if (!std::getline(in, line)) throw std::runtime_error(data_path.string() + ": too few rows");
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const char* p = line.data();
      const char* end = p + line.size();
      for (std::size_t c = 0; c < row; ++c) {
        const auto res = std::from_chars(p, end, inc[i * row + c]);
        if (res.ec != std::errc()) throw std::runtime_error(data_path.string() + ": bad number in row " + std::to_string(i + 1));
        p = res.ptr;
        if (c + 1 < row) {
          if (p == end || *p != ',') throw std::runtime_error(data_path.string() + ": short row " + std::to_string(i + 1));
          ++p;
        }
      }
    }
  }
  return BrownianBatch(grid, d, m, seed, std::move(inc));
}

}  // namespace dynrisk
