#include "propattest/common/binary_io.hpp"

#include <fstream>
#include <iterator>

namespace propattest {

void ByteWriter::magic(std::string_view four_cc) {
  if (four_cc.size() != 4) throw InvalidArgument("magic must be 4 bytes");
  buf_.insert(buf_.end(), four_cc.begin(), four_cc.end());
}

void ByteReader::expect_magic(std::string_view four_cc) {
  auto got = raw(4);
  if (std::memcmp(got.data(), four_cc.data(), 4) != 0) {
    throw IoError("bad magic, expected '" + std::string(four_cc) + "'");
  }
}

std::vector<double> ByteReader::f64s(std::size_t n) {
  need(n * 8);
  std::vector<double> out(n);
  for (auto& v : out) v = f64();
  return out;
}

std::vector<std::uint64_t> ByteReader::u64s(std::size_t n) {
  need(n * 8);
  std::vector<std::uint64_t> out(n);
  for (auto& v : out) v = u64();
  return out;
}

std::span<const std::uint8_t> ByteReader::raw(std::size_t n) {
  need(n);
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::string ByteReader::str() {
  auto n = u32();
  auto bytes = raw(n);
  return {bytes.begin(), bytes.end()};
}

void ByteReader::expect_done() const {
  if (!done()) throw IoError("trailing bytes: " + std::to_string(remaining()));
}

void ByteReader::need(std::size_t n) const {
  if (data_.size() - pos_ < n) throw IoError("truncated input");
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("short write to " + path.string());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace propattest
