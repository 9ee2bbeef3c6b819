#include "l2g/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "l2g/error.hpp"

namespace l2g {

namespace {

constexpr char kMagic[8] = {'L', '2', 'G', 'C', 'O', 'N', 'T', '\0'};

template <class T>
void put(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.append(reinterpret_cast<const char*>(buf), sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    need(sizeof(T));
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("container: truncated input");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Array Array::from_vector(const Vector& v) {
  return {{static_cast<std::uint64_t>(v.size())}, std::vector<double>(v.data(), v.data() + v.size())};
}

Array Array::from_matrix(const Matrix& m) {
  Array a{{static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())}, {}};
  a.data.reserve(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) a.data.push_back(m(i, j));
  return a;
}

std::uint64_t Array::element_count() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

Vector Array::to_vector() const {
  if (dims.size() != 1) throw DataError("array is not rank 1");
  return Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size()));
}

Matrix Array::to_matrix() const {
  if (dims.size() != 2) throw DataError("array is not rank 2");
  Matrix m(dims[0], dims[1]);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = data[k++];
  return m;
}

const Array& Container::at(const std::string& name) const {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw DataError("container: missing array '" + name + "'");
  return it->second;
}

std::string encode_container(const Container& c) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kContainerVersion);
  const std::string manifest = c.manifest.dump(2);
  put<std::uint64_t>(out, manifest.size());
  out += manifest;
  put<std::uint64_t>(out, c.arrays.size());
  for (const auto& [name, array] : c.arrays) {
    if (array.element_count() != array.data.size())
      throw DataError("container: array '" + name + "' dims do not match payload");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(array.dims.size()));
    for (auto d : array.dims) put<std::uint64_t>(out, d);
    for (double x : array.data) put<double>(out, x);
  }
  return out;
}

Container decode_container(const std::string& bytes) {
  Reader in(bytes);
  if (in.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
    throw DataError("container: bad magic");
  const auto version = in.get<std::uint32_t>();
  if (version != kContainerVersion)
    throw DataError("container: unsupported version " + std::to_string(version));
  Container c;
  const auto manifest_len = in.get<std::uint64_t>();
  try {
    c.manifest = nlohmann::json::parse(in.bytes(manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("container: bad manifest: ") + e.what());
  }
  const auto count = in.get<std::uint64_t>();
  for (std::uint64_t a = 0; a < count; ++a) {
    const auto name = in.bytes(in.get<std::uint32_t>());
    Array array;
    array.dims.resize(in.get<std::uint32_t>());
    for (auto& d : array.dims) d = in.get<std::uint64_t>();
    array.data.resize(array.element_count());
    for (auto& x : array.data) x = in.get<double>();
    c.arrays.emplace(name, std::move(array));
  }
  if (!in.done()) throw DataError("container: trailing bytes");
  return c;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw DataError("write failed for '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_container(const std::filesystem::path& path, const Container& c) {
  write_text_file(path, encode_container(c));
}

Container read_container(const std::filesystem::path& path) {
  try {
    return decode_container(read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace l2g
