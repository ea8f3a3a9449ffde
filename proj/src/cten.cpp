#include "slr/cten.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace slr {
namespace {

constexpr char kMagic[4] = {'C', 'T', 'E', 'N'};
constexpr std::uint8_t kVersion = 1;

template <class U>
void put_le(std::vector<std::uint8_t> &out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <class U>
U get_le(const std::uint8_t *p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const ComplexTensor &x, CtenDtype dtype) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(kVersion);
  out.push_back(static_cast<std::uint8_t>(dtype));
  if (x.ndim() > 255) throw FormatError("CTEN supports at most 255 dimensions");
  out.push_back(static_cast<std::uint8_t>(x.ndim()));
  for (auto e : x.shape()) put_le<std::uint64_t>(out, e);
  const std::size_t bytes_per = dtype == CtenDtype::Complex128 ? 16 : 8;
  out.reserve(out.size() + x.size() * bytes_per);
  for (const auto &v : x) {
    if (dtype == CtenDtype::Complex128) {
      put_le(out, std::bit_cast<std::uint64_t>(v.real()));
      put_le(out, std::bit_cast<std::uint64_t>(v.imag()));
    } else {
      put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v.real())));
      put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v.imag())));
    }
  }
  return out;
}

ComplexTensor decode_tensor(const std::vector<std::uint8_t> &bytes) {
  if (bytes.size() < 7) throw FormatError("CTEN: truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("CTEN: bad magic");
  if (bytes[4] != kVersion) throw FormatError("CTEN: unsupported version " + std::to_string(bytes[4]));
  const std::uint8_t dtype = bytes[5];
  if (dtype > 1) throw FormatError("CTEN: unknown dtype " + std::to_string(dtype));
  const std::size_t ndim = bytes[6];
  std::size_t pos = 7;
  if (bytes.size() < pos + 8 * ndim) throw FormatError("CTEN: truncated extents");
  Shape shape(ndim);
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    const auto e = get_le<std::uint64_t>(bytes.data() + pos);
    pos += 8;
    if (e != 0 && count > std::numeric_limits<std::uint64_t>::max() / e)
      throw FormatError("CTEN: dimension overflow");
    count *= e;
    shape[i] = static_cast<std::size_t>(e);
  }
  const std::size_t bytes_per = dtype == 0 ? 16 : 8;
  const std::size_t remaining = bytes.size() - pos;
  if (count > remaining / bytes_per) throw FormatError("CTEN: truncated payload");
  if (count * bytes_per != remaining) throw FormatError("CTEN: trailing bytes after payload");
  std::vector<cplx> data(count);
  const std::uint8_t *p = bytes.data() + pos;
  for (std::size_t i = 0; i < count; ++i) {
    if (dtype == 0) {
      data[i] = {std::bit_cast<double>(get_le<std::uint64_t>(p)),
                 std::bit_cast<double>(get_le<std::uint64_t>(p + 8))};
      p += 16;
    } else {
      data[i] = {std::bit_cast<float>(get_le<std::uint32_t>(p)),
                 std::bit_cast<float>(get_le<std::uint32_t>(p + 4))};
      p += 8;
    }
  }
  return ComplexTensor(std::move(shape), std::move(data));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path &path, const std::vector<std::uint8_t> &bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void write_text(const std::filesystem::path &path, const std::string &text) {
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

void save_tensor(const std::filesystem::path &path, const ComplexTensor &x, CtenDtype dtype) {
  write_file(path, encode_tensor(x, dtype));
}

ComplexTensor load_tensor(const std::filesystem::path &path) { return decode_tensor(read_file(path)); }

void save_real_tensor(const std::filesystem::path &path, const RealTensor &x) {
  save_tensor(path, to_complex(x));
}

RealTensor load_real_tensor(const std::filesystem::path &path) {
  const auto c = load_tensor(path);
  RealTensor out(c.shape());
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i].real();
  return out;
}

}  // namespace slr
