#include "metava/data/record.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "metava/util/bytes.hpp"

namespace metava::data {

namespace fs = std::filesystem;

ParseError::ParseError(std::string path, std::size_t offset, const std::string& what)
    : std::runtime_error(path + ": byte " + std::to_string(offset) + ": " + what),
      path_(std::move(path)),
      offset_(offset) {}

void normalize_annotations(Record& record) {
  const std::size_t n = record.samples.size();
  for (const auto& iv : record.annotations) {
    if (iv.end <= iv.start)
      throw std::invalid_argument("annotation [" + std::to_string(iv.start) + "," +
                                  std::to_string(iv.end) + ") is empty or reversed");
    if (iv.end > n)
      throw std::invalid_argument("annotation [" + std::to_string(iv.start) + "," +
                                  std::to_string(iv.end) + ") exceeds record length " +
                                  std::to_string(n));
  }
  auto& a = record.annotations;
  std::sort(a.begin(), a.end(), [](const Interval& x, const Interval& y) {
    return x.start < y.start || (x.start == y.start && x.end < y.end);
  });
  std::vector<Interval> merged;
  for (const auto& iv : a) {
    if (!merged.empty() && iv.start <= merged.back().end)
      merged.back().end = std::max(merged.back().end, iv.end);
    else
      merged.push_back(iv);
  }
  a = std::move(merged);
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Iterates lines, reporting each with the byte offset of its first character.
template <class F>
void for_each_line(std::string_view text, F&& f) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    f(text.substr(pos, nl - pos), pos);
    pos = nl + 1;
  }
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

const std::string_view kMagic = "MVA1";

Record load_csv(const fs::path& path) {
  const std::string text = read_file(path);
  const std::string name = path.string();
  Record rec;
  bool have_header = false, have_rate = false, have_subject = false;
  for_each_line(text, [&](std::string_view line, std::size_t off) {
    const auto body = trim(line);
    if (!have_header) {
      have_header = true;
      std::size_t p = 0;
      while (p <= line.size()) {
        std::size_t comma = line.find(',', p);
        if (comma == std::string_view::npos) comma = line.size();
        const auto field = trim(line.substr(p, comma - p));
        const auto eq = field.find('=');
        if (eq == std::string_view::npos)
          throw ParseError(name, off + p, "header field without '=': " + std::string(field));
        const auto key = trim(field.substr(0, eq));
        const auto value = trim(field.substr(eq + 1));
        if (key == "rate") {
          if (!parse_number(value, rec.rate) || !(rec.rate > 0))
            throw ParseError(name, off + p, "invalid rate '" + std::string(value) + "'");
          have_rate = true;
        } else if (key == "subject") {
          rec.subject = std::string(value);
          have_subject = true;
        } else {
          throw ParseError(name, off + p, "unknown header key '" + std::string(key) + "'");
        }
        p = comma + 1;
      }
      if (!have_rate) throw ParseError(name, off, "header lacks rate=<Hz>");
      if (!have_subject) throw ParseError(name, off, "header lacks subject=<id>");
      return;
    }
    if (body.empty()) return;
    double v = 0;
    if (!parse_number(body, v) || !std::isfinite(v))
      throw ParseError(name, off, "invalid sample value '" + std::string(body) + "'");
    rec.samples.push_back(v);
  });
  if (!have_header) throw ParseError(name, 0, "empty file, expected header");

  fs::path ann = path;
  ann += ".ann";
  if (fs::exists(ann)) {
    const std::string atext = read_file(ann);
    const std::string aname = ann.string();
    for_each_line(atext, [&](std::string_view line, std::size_t off) {
      const auto body = trim(line);
      if (body.empty()) return;
      const auto c1 = body.find(',');
      const auto c2 = c1 == std::string_view::npos ? c1 : body.find(',', c1 + 1);
      if (c2 == std::string_view::npos)
        throw ParseError(aname, off, "expected <start>,<end>,VA");
      Interval iv;
      if (!parse_number(body.substr(0, c1), iv.start) ||
          !parse_number(body.substr(c1 + 1, c2 - c1 - 1), iv.end))
        throw ParseError(aname, off, "invalid interval bounds");
      if (trim(body.substr(c2 + 1)) != "VA")
        throw ParseError(aname, off, "unsupported annotation label '" +
                                         std::string(trim(body.substr(c2 + 1))) + "'");
      if (iv.end <= iv.start)
        throw ParseError(aname, off, "interval end " + std::to_string(iv.end) +
                                         " not after start " + std::to_string(iv.start));
      if (iv.end > rec.samples.size())
        throw ParseError(aname, off, "interval end " + std::to_string(iv.end) +
                                         " beyond record length " +
                                         std::to_string(rec.samples.size()));
      rec.annotations.push_back(iv);
    });
  }
  normalize_annotations(rec);
  return rec;
}

Record load_binary(const fs::path& path) {
  const std::string data = read_file(path);
  const std::string name = path.string();
  bytes::Reader r(data);
  Record rec;
  try {
    if (r.raw(4) != kMagic) throw ParseError(name, 0, "bad magic, expected MVA1");
    rec.rate = r.f32();
    if (!(rec.rate > 0)) throw ParseError(name, 4, "invalid rate");
    const std::uint32_t id_len = r.u32();
    rec.subject = std::string(r.raw(id_len));
    const std::uint64_t n = r.u64();
    if (n > r.remaining() / 4) throw ParseError(name, r.offset(), "sample count exceeds file size");
    rec.samples.resize(n);
    for (auto& s : rec.samples) s = r.f32();
    const std::uint32_t n_ann = r.u32();
    for (std::uint32_t i = 0; i < n_ann; ++i) {
      const std::size_t off = r.offset();
      Interval iv{r.u64(), r.u64()};
      if (iv.end <= iv.start) throw ParseError(name, off, "interval end not after start");
      if (iv.end > n) throw ParseError(name, off, "interval beyond record length");
      rec.annotations.push_back(iv);
    }
    if (r.remaining() != 0) throw ParseError(name, r.offset(), "trailing bytes");
  } catch (const bytes::Truncated& t) {
    throw ParseError(name, t.offset, "truncated file");
  }
  normalize_annotations(rec);
  return rec;
}

}  // namespace

Record load_record(const fs::path& path, RecordFormat format) {
  if (format == RecordFormat::detect) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    char head[4] = {};
    in.read(head, 4);
    format = in.gcount() == 4 && std::string_view(head, 4) == kMagic ? RecordFormat::binary
                                                                       : RecordFormat::csv;
  }
  return format == RecordFormat::binary ? load_binary(path) : load_csv(path);
}

void write_record(const Record& record, const fs::path& path, RecordFormat format) {
  if (format == RecordFormat::binary) {
    bytes::Writer w;
    w.raw(kMagic);
    w.f32(static_cast<float>(record.rate));
    w.u32(static_cast<std::uint32_t>(record.subject.size()));
    w.raw(record.subject);
    w.u64(record.samples.size());
    for (double s : record.samples) w.f32(static_cast<float>(s));
    w.u32(static_cast<std::uint32_t>(record.annotations.size()));
    for (const auto& iv : record.annotations) {
      w.u64(iv.start);
      w.u64(iv.end);
    }
    write_file(path, w.str());
    return;
  }
  std::ostringstream out;
  out.precision(std::numeric_limits<double>::max_digits10);
  out << "rate=" << record.rate << ",subject=" << record.subject << '\n';
  for (double s : record.samples) out << s << '\n';
  write_file(path, out.str());
  std::ostringstream ann;
  for (const auto& iv : record.annotations) ann << iv.start << ',' << iv.end << ",VA\n";
  fs::path ann_path = path;
  ann_path += ".ann";
  if (!record.annotations.empty())
    write_file(ann_path, ann.str());
  else if (fs::exists(ann_path))
    fs::remove(ann_path);
}

Record resample_linear(const Record& record, double target_rate) {
  if (record.samples.empty()) throw std::invalid_argument("resample_linear: empty record");
  if (!(record.rate > 0) || !(target_rate > 0))
    throw std::invalid_argument("resample_linear: rates must be positive");
  Record out;
  out.subject = record.subject;
  out.rate = target_rate;
  if (record.rate == target_rate) {
    out.samples = record.samples;
    out.annotations = record.annotations;
    return out;
  }
  const std::size_t n = record.samples.size();
  const double ratio = record.rate / target_rate;  // source samples per output sample
  // Largest j with j * ratio <= n - 1, guarding against representation error.
  const double last = static_cast<double>(n - 1) / ratio;
  std::size_t count = static_cast<std::size_t>(std::floor(last + 1e-9)) + 1;
  out.samples.resize(count);
  for (std::size_t j = 0; j < count; ++j) {
    const double t = static_cast<double>(j) * ratio;
    std::size_t i = static_cast<std::size_t>(std::floor(t));
    if (i >= n - 1) {
      out.samples[j] = record.samples[n - 1];
      continue;
    }
    const double frac = t - static_cast<double>(i);
    out.samples[j] = record.samples[i] + frac * (record.samples[i + 1] - record.samples[i]);
  }
  const double scale = target_rate / record.rate;
  for (const auto& iv : record.annotations) {
    auto s = static_cast<std::size_t>(std::llround(static_cast<double>(iv.start) * scale));
    auto e = static_cast<std::size_t>(std::llround(static_cast<double>(iv.end) * scale));
    e = std::min(e, count);
    if (e > s) out.annotations.push_back({s, e});
  }
  normalize_annotations(out);
  return out;
}

}  // namespace metava::data
