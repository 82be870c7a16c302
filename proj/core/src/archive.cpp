#include "corefdre/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace corefdre {
namespace {

constexpr char kMagic[8] = {'C', 'D', 'R', 'E', 'A', 'R', 'C', 'H'};

enum Tag : std::uint8_t { kText = 1, kStrings = 2, kMatrix = 3, kU64 = 4, kF64 = 5 };

void write_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void write_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void write_str(std::string& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

void write_f64(std::string& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ArchiveError("archive truncated at byte " + std::to_string(pos_));
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto v = bytes_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void Archive::put(const std::string& name, Payload payload) {
  if (has(name)) throw ArchiveError("duplicate archive entry: " + name);
  entries_.push_back(Entry{name, std::move(payload)});
}

void Archive::put_text(const std::string& name, std::string value) { put(name, std::move(value)); }
void Archive::put_strings(const std::string& name, std::vector<std::string> values) { put(name, std::move(values)); }
void Archive::put_matrix(const std::string& name, const Matrix& value) { put(name, value); }
void Archive::put_u64(const std::string& name, std::uint64_t value) { put(name, value); }
void Archive::put_f64(const std::string& name, double value) { put(name, value); }

bool Archive::has(const std::string& name) const {
  for (const Entry& e : entries_)
    if (e.name == name) return true;
  return false;
}

const Archive::Entry& Archive::find(const std::string& name) const {
  for (const Entry& e : entries_)
    if (e.name == name) return e;
  throw ArchiveError("archive has no entry '" + name + "'");
}

template <typename T>
static const T& typed(const std::variant<std::string, std::vector<std::string>, Matrix, std::uint64_t, double>& p,
                      const std::string& name) {
  if (const T* v = std::get_if<T>(&p)) return *v;
  throw ArchiveError("archive entry '" + name + "' has an unexpected type");
}

const std::string& Archive::text(const std::string& name) const { return typed<std::string>(find(name).payload, name); }
const std::vector<std::string>& Archive::strings(const std::string& name) const {
  return typed<std::vector<std::string>>(find(name).payload, name);
}
const Matrix& Archive::matrix(const std::string& name) const { return typed<Matrix>(find(name).payload, name); }
std::uint64_t Archive::u64(const std::string& name) const { return typed<std::uint64_t>(find(name).payload, name); }
double Archive::f64(const std::string& name) const { return typed<double>(find(name).payload, name); }

std::vector<std::string> Archive::names() const {
  std::vector<std::string> out;
  for (const Entry& e : entries_) out.push_back(e.name);
  return out;
}

std::string Archive::serialize() const {
  std::string out(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  write_str(out, kind_);
  write_u32(out, static_cast<std::uint32_t>(entries_.size()));
  for (const Entry& e : entries_) {
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, std::string>) {
            out.push_back(static_cast<char>(kText));
            write_str(out, e.name);
            write_str(out, v);
          } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
            out.push_back(static_cast<char>(kStrings));
            write_str(out, e.name);
            write_u32(out, static_cast<std::uint32_t>(v.size()));
            for (const auto& s : v) write_str(out, s);
          } else if constexpr (std::is_same_v<T, Matrix>) {
            out.push_back(static_cast<char>(kMatrix));
            write_str(out, e.name);
            write_u32(out, static_cast<std::uint32_t>(v.rows()));
            write_u32(out, static_cast<std::uint32_t>(v.cols()));
            for (Eigen::Index r = 0; r < v.rows(); ++r)
              for (Eigen::Index c = 0; c < v.cols(); ++c) write_f64(out, v(r, c));
          } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            out.push_back(static_cast<char>(kU64));
            write_str(out, e.name);
            write_u64(out, v);
          } else {
            out.push_back(static_cast<char>(kF64));
            write_str(out, e.name);
            write_f64(out, v);
          }
        },
        e.payload);
  }
  return out;
}

Archive Archive::parse(std::string_view bytes) {
  Reader in(bytes);
  if (in.raw(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) throw ArchiveError("not a corefdre archive");
  const std::uint32_t version = in.u32();
  if (version != kVersion) throw ArchiveError("unsupported archive version " + std::to_string(version));
  Archive archive(in.str());
  const std::uint32_t n = in.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint8_t tag = in.u8();
    std::string name = in.str();
    switch (tag) {
      case kText:
        archive.put_text(name, in.str());
        break;
      case kStrings: {
        const std::uint32_t count = in.u32();
        std::vector<std::string> values;
        values.reserve(count);
        for (std::uint32_t k = 0; k < count; ++k) values.push_back(in.str());
        archive.put_strings(name, std::move(values));
        break;
      }
      case kMatrix: {
        const std::uint32_t rows = in.u32();
        const std::uint32_t cols = in.u32();
        in.need(static_cast<std::size_t>(rows) * cols * 8);
        Matrix m(rows, cols);
        for (std::uint32_t r = 0; r < rows; ++r)
          for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = in.f64();
        archive.put_matrix(name, m);
        break;
      }
      case kU64:
        archive.put_u64(name, in.u64());
        break;
      case kF64:
        archive.put_f64(name, in.f64());
        break;
      default:
        throw ArchiveError("unknown archive tag " + std::to_string(tag) + " for entry '" + name + "'");
    }
  }
  if (!in.done()) throw ArchiveError("trailing bytes after archive entries");
  return archive;
}

void Archive::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArchiveError("cannot open " + path.string() + " for writing");
  const std::string bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ArchiveError("failed writing " + path.string());
}

Archive Archive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArchiveError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse(buffer.str());
  } catch (const ArchiveError& e) {
    throw ArchiveError(path.string() + ": " + e.what());
  }
}

}  // namespace corefdre
