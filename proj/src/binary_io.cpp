#include "dasc/binary_io.hpp"

#include <fstream>
#include <iterator>

#include "dasc/errors.hpp"

namespace dasc::io {

void ByteReader::fail(const std::string& why) const {
  throw FormatError(source_ + ": " + why + " at offset " + std::to_string(pos_));
}

void ByteReader::need(std::size_t n, std::string_view what) const {
  if (remaining() < n) {
    fail("truncated while reading " + std::string(what) + " (need " +
         std::to_string(n) + " bytes, " + std::to_string(remaining()) + " left)");
  }
}

std::string ByteReader::bytes(std::size_t n, std::string_view what) {
  need(n, what);
  std::string s(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
  pos_ += n;
  return s;
}

std::uint8_t ByteReader::u8(std::string_view what) {
  need(1, what);
  return static_cast<std::uint8_t>(data_[pos_++]);
}

std::uint16_t ByteReader::u16(std::string_view what) {
  need(2, what);
  std::uint16_t v = 0;
  for (int i = 0; i < 2; ++i)
    v |= static_cast<std::uint16_t>(static_cast<unsigned char>(data_[pos_++]) << (8 * i));
  return v;
}

std::uint32_t ByteReader::u32(std::string_view what) {
  need(4, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
  return v;
}

float ByteReader::f32(std::string_view what) { return std::bit_cast<float>(u32(what)); }

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::vector<char>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw DataError("short write to " + path.string());
}

}  // namespace dasc::io
