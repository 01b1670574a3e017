#include "vidfeat/tensor_file.hpp"

#include <cstring>
#include <fstream>
#include <limits>

namespace vidfeat {
namespace {

constexpr char kMagic[4] = {'T', 'C', 'N', '1'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;
constexpr std::uint64_t kMaxElements = 1ull << 36;

void put_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

class Reader {
 public:
  explicit Reader(const std::vector<char>& buf) : buf_(buf) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }

  void need(std::size_t n, const char* what) {
    if (remaining() < n)
      throw IoError(IoError::Kind::corrupt_header,
                    std::string("tensor file ends inside ") + what);
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<unsigned char>(buf_[pos_]) |
                      (static_cast<std::uint16_t>(static_cast<unsigned char>(buf_[pos_ + 1])) << 8);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<unsigned char>(buf_[pos_++]);
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }

 private:
  const std::vector<char>& buf_;
  std::size_t pos_ = 0;
};

std::uint64_t checked_element_count(const std::vector<std::uint32_t>& shape) {
  std::uint64_t n = 1;
  for (std::uint32_t d : shape) {
    if (d == 0) throw IoError(IoError::Kind::corrupt_header, "zero dimension in tensor shape");
    if (n > kMaxElements / d)
      throw IoError(IoError::Kind::corrupt_header, "tensor shape overflows size limit");
    n *= d;
  }
  return n;
}

}  // namespace

std::size_t NamedTensor::element_count() const {
  std::size_t n = 1;
  for (std::uint32_t d : shape) n *= d;
  return n;
}

void TensorFile::add(std::string name, std::vector<std::uint32_t> shape,
                     std::vector<float> values) {
  if (name.empty() || name.size() > std::numeric_limits<std::uint16_t>::max())
    throw std::invalid_argument("tensor name empty or too long");
  if (shape.empty() || shape.size() > 8)
    throw std::invalid_argument("tensor rank must be 1..8");
  if (has(name)) throw std::invalid_argument("duplicate tensor name: " + name);
  std::uint64_t n = 1;
  for (std::uint32_t d : shape) {
    if (d == 0) throw std::invalid_argument("zero dimension in tensor shape");
    n *= d;
  }
  if (n != values.size())
    throw std::invalid_argument("tensor value count does not match shape: " + name);
  tensors_.push_back(NamedTensor{std::move(name), std::move(shape), std::move(values)});
}

void TensorFile::add_matrix(const std::string& name, const Eigen::MatrixXd& m) {
  std::vector<float> v(static_cast<std::size_t>(m.rows()) * m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      v[static_cast<std::size_t>(r) * m.cols() + c] = static_cast<float>(m(r, c));
  add(name, {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())},
      std::move(v));
}

void TensorFile::add_vector(const std::string& name, const Eigen::VectorXd& v) {
  std::vector<float> vals(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) vals[i] = static_cast<float>(v(i));
  add(name, {static_cast<std::uint32_t>(v.size())}, std::move(vals));
}

bool TensorFile::has(const std::string& name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return true;
  return false;
}

const NamedTensor& TensorFile::get(const std::string& name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return t;
  throw std::out_of_range("tensor not found: " + name);
}

Eigen::MatrixXd TensorFile::matrix(const std::string& name) const {
  const NamedTensor& t = get(name);
  if (t.shape.size() != 2) throw std::out_of_range("tensor is not 2-D: " + name);
  Eigen::MatrixXd m(t.shape[0], t.shape[1]);
  for (std::uint32_t r = 0; r < t.shape[0]; ++r)
    for (std::uint32_t c = 0; c < t.shape[1]; ++c)
      m(r, c) = t.values[static_cast<std::size_t>(r) * t.shape[1] + c];
  return m;
}

Eigen::VectorXd TensorFile::vector(const std::string& name) const {
  const NamedTensor& t = get(name);
  if (t.shape.size() != 1) throw std::out_of_range("tensor is not 1-D: " + name);
  Eigen::VectorXd v(t.shape[0]);
  for (std::uint32_t i = 0; i < t.shape[0]; ++i) v(i) = t.values[i];
  return v;
}

void TensorFile::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(IoError::Kind::missing_file, "cannot open for write: " + path.string());

  os.write(kMagic, 4);
  put_u16(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(tensors_.size()));

  std::uint64_t offset = 0;
  for (const auto& t : tensors_) {
    put_u16(os, static_cast<std::uint16_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    os.put(static_cast<char>(kDtypeF32));
    os.put(static_cast<char>(t.shape.size()));
    for (std::uint32_t d : t.shape) put_u32(os, d);
    put_u64(os, offset);
    offset += t.element_count() * sizeof(float);
  }
  for (const auto& t : tensors_) {
    static_assert(sizeof(float) == 4);
    os.write(reinterpret_cast<const char*>(t.values.data()),
             static_cast<std::streamsize>(t.values.size() * sizeof(float)));
  }
  if (!os) throw IoError(IoError::Kind::truncated_payload, "short write: " + path.string());
}

TensorFile TensorFile::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(IoError::Kind::missing_file, "cannot open: " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  Reader r(buf);
  {
    std::string magic = r.str(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0)
      throw IoError(IoError::Kind::corrupt_header, "bad magic, not a TCN1 file");
  }
  if (r.u16("version") != kVersion)
    throw IoError(IoError::Kind::bad_format, "unsupported TCN1 version");
  std::uint32_t count = r.u32("tensor count");

  struct Entry {
    std::string name;
    std::vector<std::uint32_t> shape;
    std::uint64_t offset;
    std::uint64_t bytes;
  };
  std::vector<Entry> entries;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    std::uint16_t name_len = r.u16("table entry");
    e.name = r.str(name_len, "tensor name");
    if (e.name.empty()) throw IoError(IoError::Kind::corrupt_header, "empty tensor name");
    std::uint8_t dtype = r.u8("dtype");
    if (dtype != kDtypeF32) throw IoError(IoError::Kind::bad_format, "unsupported dtype");
    std::uint8_t ndim = r.u8("rank");
    if (ndim == 0 || ndim > 8) throw IoError(IoError::Kind::corrupt_header, "bad tensor rank");
    e.shape.resize(ndim);
    for (std::uint8_t d = 0; d < ndim; ++d) e.shape[d] = r.u32("shape");
    e.offset = r.u64("offset");
    e.bytes = checked_element_count(e.shape) * sizeof(float);
    for (const auto& prev : entries)
      if (prev.name == e.name)
        throw IoError(IoError::Kind::corrupt_header, "duplicate tensor name: " + e.name);
    entries.push_back(std::move(e));
  }

  std::uint64_t payload_len = r.remaining();
  std::uint64_t total = 0;
  for (const auto& e : entries) {
    if (e.offset > payload_len || e.bytes > payload_len - e.offset) {
      if (e.offset + e.bytes > payload_len && e.offset <= payload_len)
        throw IoError(IoError::Kind::truncated_payload,
                      "payload too short for tensor: " + e.name);
      throw IoError(IoError::Kind::corrupt_header, "tensor offset out of range: " + e.name);
    }
    total += e.bytes;
    for (const auto& other : entries) {
      if (&other == &e) break;
      bool disjoint = e.offset + e.bytes <= other.offset || other.offset + other.bytes <= e.offset;
      if (!disjoint)
        throw IoError(IoError::Kind::corrupt_header,
                      "overlapping tensors: " + other.name + ", " + e.name);
    }
  }
  if (total != payload_len)
    throw IoError(IoError::Kind::corrupt_header, "payload length does not match table");

  TensorFile tf;
  std::size_t payload_start = r.pos();
  for (const auto& e : entries) {
    NamedTensor t;
    t.name = e.name;
    t.shape = e.shape;
    t.values.resize(e.bytes / sizeof(float));
    std::memcpy(t.values.data(), buf.data() + payload_start + e.offset, e.bytes);
    tf.tensors_.push_back(std::move(t));
  }
  return tf;
}

}  // namespace vidfeat
