#include "somnus/edf.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>

namespace somnus::edf {
namespace {

// ============================================================
// Fixed-width ASCII field helpers
// ============================================================

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string field(const std::vector<std::uint8_t>& bytes, std::size_t off, std::size_t len) {
  return std::string(reinterpret_cast<const char*>(bytes.data()) + off, len);
}

void put_field(std::vector<std::uint8_t>& out, const std::string& text, std::size_t len,
               const char* what) {
  if (text.size() > len) {
    throw MalformedHeader(std::string(what) + " does not fit in " + std::to_string(len) +
                          " bytes: '" + text + "'");
  }
  for (char c : text) {
    if (c < 32 || c > 126) {
      throw MalformedHeader(std::string(what) + " contains a non-printable byte");
    }
  }
  for (std::size_t i = 0; i < len; ++i) {
    out.push_back(i < text.size() ? static_cast<std::uint8_t>(text[i]) : ' ');
  }
}

long parse_int_field(const std::string& raw, const char* what) {
  const std::string s = trim(raw);
  if (s.empty()) throw MalformedHeader(std::string(what) + " is empty");
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (errno != 0 || end != s.c_str() + s.size()) {
    throw MalformedHeader(std::string(what) + " is not an integer: '" + s + "'");
  }
  return v;
}

double parse_real_field(const std::string& raw, const char* what) {
  const std::string s = trim(raw);
  if (s.empty()) throw MalformedHeader(std::string(what) + " is empty");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (errno != 0 || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw MalformedHeader(std::string(what) + " is not a number: '" + s + "'");
  }
  return v;
}

std::string format_int(long v, std::size_t width, const char* what) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%ld", v);
  if (std::strlen(buf) > width) {
    throw MalformedHeader(std::string(what) + " does not fit in " + std::to_string(width) +
                          " bytes: " + buf);
  }
  return buf;
}

// Shortest-that-fits decimal rendering. Iterated to a fixpoint of
// format(parse(.)) so that rewriting a parsed file reproduces the exact
// header bytes even when the original value needed rounding to fit.
std::string format_real_once(double v, std::size_t width) {
  if (std::floor(v) == v && std::fabs(v) < 1e15) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.0f", v);
    if (std::strlen(buf) <= width) return buf;
  }
  for (int prec = 15; prec >= 1; --prec) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strlen(buf) <= width) return buf;
  }
  return {};
}

std::string format_real(double v, std::size_t width, const char* what) {
  if (!std::isfinite(v)) throw MalformedHeader(std::string(what) + " is not finite");
  std::string s = format_real_once(v, width);
  for (int round = 0; round < 3 && !s.empty(); ++round) {
    const double reparsed = std::strtod(s.c_str(), nullptr);
    const std::string again = format_real_once(reparsed, width);
    if (again == s) return s;
    s = again;
  }
  if (s.empty()) {
    throw MalformedHeader(std::string(what) + " cannot be represented in " +
                          std::to_string(width) + " bytes");
  }
  return s;
}

constexpr std::size_t kMainHeaderBytes = 256;
constexpr std::size_t kPerSignalHeaderBytes = 256;

}  // namespace

// ============================================================
// Queries
// ============================================================

bool is_annotation_signal(const SignalDef& sd) {
  return trim(sd.label) == "EDF Annotations";
}

double sampling_rate_hz(const Recording& rec, const SignalDef& sd) {
  return static_cast<double>(sd.samples_per_record) / rec.record_duration_s;
}

// ============================================================
// Parse
// ============================================================

Recording parse_recording(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kMainHeaderBytes) {
    throw TruncatedFile("file shorter than the 256-byte header");
  }

  Recording rec;
  const std::string version = trim(field(bytes, 0, 8));
  if (version != "0") {
    throw MalformedHeader("unsupported version field '" + version + "'");
  }
  rec.patient_id = trim(field(bytes, 8, 80));
  rec.recording_id = trim(field(bytes, 88, 80));
  rec.start_date = trim(field(bytes, 168, 8));
  rec.start_time = trim(field(bytes, 176, 8));
  const long header_bytes = parse_int_field(field(bytes, 184, 8), "header byte count");
  rec.reserved = trim(field(bytes, 192, 44));
  const long num_records = parse_int_field(field(bytes, 236, 8), "record count");
  rec.record_duration_s = parse_real_field(field(bytes, 244, 8), "record duration");
  const long ns = parse_int_field(field(bytes, 252, 4), "signal count");

  if (ns < 1) throw MalformedHeader("signal count must be at least 1");
  if (rec.record_duration_s <= 0.0) throw MalformedHeader("record duration must be positive");
  if (num_records < -1) throw MalformedHeader("record count must be >= 0 (or -1 for unknown)");

  const std::size_t total_header =
      kMainHeaderBytes + static_cast<std::size_t>(ns) * kPerSignalHeaderBytes;
  if (header_bytes != static_cast<long>(total_header)) {
    throw InconsistentSignalCount("header byte count " + std::to_string(header_bytes) +
                                  " does not match " + std::to_string(ns) + " signals");
  }
  if (bytes.size() < total_header) {
    throw TruncatedFile("file ends inside the signal headers");
  }

  // Signal header fields are grouped by field, not by signal.
  std::size_t off = kMainHeaderBytes;
  const std::size_t n = static_cast<std::size_t>(ns);
  rec.signals.resize(n);
  auto each = [&](std::size_t len, auto&& assign) {
    for (std::size_t i = 0; i < n; ++i) assign(rec.signals[i], field(bytes, off + i * len, len));
    off += n * len;
  };
  each(16, [](SignalDef& s, const std::string& v) { s.label = trim(v); });
  each(80, [](SignalDef& s, const std::string& v) { s.transducer = trim(v); });
  each(8, [](SignalDef& s, const std::string& v) { s.physical_dimension = trim(v); });
  each(8, [](SignalDef& s, const std::string& v) {
    s.physical_min = parse_real_field(v, "physical minimum");
  });
  each(8, [](SignalDef& s, const std::string& v) {
    s.physical_max = parse_real_field(v, "physical maximum");
  });
  each(8, [](SignalDef& s, const std::string& v) {
    s.digital_min = static_cast<int>(parse_int_field(v, "digital minimum"));
  });
  each(8, [](SignalDef& s, const std::string& v) {
    s.digital_max = static_cast<int>(parse_int_field(v, "digital maximum"));
  });
  each(80, [](SignalDef& s, const std::string& v) { s.prefilter = trim(v); });
  each(8, [](SignalDef& s, const std::string& v) {
    s.samples_per_record = static_cast<int>(parse_int_field(v, "samples per record"));
  });
  each(32, [](SignalDef& s, const std::string& v) { s.reserved = trim(v); });

  std::size_t record_bytes = 0;
  for (const SignalDef& sd : rec.signals) {
    if (sd.samples_per_record < 1) throw MalformedHeader("samples per record must be >= 1");
    if (sd.digital_min >= sd.digital_max) {
      throw MalformedHeader("digital minimum must be below digital maximum for '" + sd.label + "'");
    }
    if (sd.physical_min == sd.physical_max) {
      throw MalformedHeader("physical minimum equals physical maximum for '" + sd.label + "'");
    }
    record_bytes += static_cast<std::size_t>(sd.samples_per_record) * 2;
  }

  const std::size_t avail = bytes.size() - total_header;
  std::size_t records;
  if (num_records < 0) {
    // Unknown record count: infer from the payload, which must tile exactly.
    if (avail % record_bytes != 0) {
      throw TruncatedFile("payload is not a whole number of data records");
    }
    records = avail / record_bytes;
  } else {
    records = static_cast<std::size_t>(num_records);
    if (avail < records * record_bytes) {
      throw TruncatedFile("file ends inside data record " +
                          std::to_string(avail / record_bytes));
    }
  }
  rec.num_records = static_cast<int>(records);

  rec.samples.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    rec.samples[i].resize(records * static_cast<std::size_t>(rec.signals[i].samples_per_record));
  }
  const std::uint8_t* p = bytes.data() + total_header;
  for (std::size_t r = 0; r < records; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t spr = static_cast<std::size_t>(rec.signals[i].samples_per_record);
      std::int16_t* dst = rec.samples[i].data() + r * spr;
      for (std::size_t k = 0; k < spr; ++k) {
        const std::uint16_t u = static_cast<std::uint16_t>(p[0]) |
                                (static_cast<std::uint16_t>(p[1]) << 8);
        dst[k] = static_cast<std::int16_t>(u);
        p += 2;
      }
    }
  }
  return rec;
}

// ============================================================
// Write
// ============================================================

std::vector<std::uint8_t> write_recording(const Recording& rec) {
  const std::size_t n = rec.signals.size();
  if (n == 0) throw MalformedHeader("a recording must declare at least one signal");
  if (rec.samples.size() != n) {
    throw InconsistentSignalCount("sample vectors (" + std::to_string(rec.samples.size()) +
                                  ") do not match signals (" + std::to_string(n) + ")");
  }
  if (rec.num_records < 0) throw MalformedHeader("record count must be non-negative");
  if (rec.record_duration_s <= 0.0) throw MalformedHeader("record duration must be positive");

  std::size_t record_bytes = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const SignalDef& sd = rec.signals[i];
    if (sd.samples_per_record < 1) throw MalformedHeader("samples per record must be >= 1");
    if (sd.digital_min >= sd.digital_max) {
      throw MalformedHeader("digital minimum must be below digital maximum for '" + sd.label + "'");
    }
    if (sd.physical_min == sd.physical_max) {
      throw MalformedHeader("physical minimum equals physical maximum for '" + sd.label + "'");
    }
    const std::size_t expected =
        static_cast<std::size_t>(rec.num_records) * static_cast<std::size_t>(sd.samples_per_record);
    if (rec.samples[i].size() != expected) {
      throw InconsistentSignalCount("signal '" + sd.label + "' holds " +
                                    std::to_string(rec.samples[i].size()) + " samples, header implies " +
                                    std::to_string(expected));
    }
    if (!is_annotation_signal(sd)) {
      for (std::int16_t v : rec.samples[i]) {
        if (v < sd.digital_min || v > sd.digital_max) {
          throw RangeOverflow("sample " + std::to_string(v) + " outside digital range of '" +
                              sd.label + "'");
        }
      }
    }
    record_bytes += static_cast<std::size_t>(sd.samples_per_record) * 2;
  }

  const std::size_t total_header = kMainHeaderBytes + n * kPerSignalHeaderBytes;
  std::vector<std::uint8_t> out;
  out.reserve(total_header + static_cast<std::size_t>(rec.num_records) * record_bytes);

  put_field(out, "0", 8, "version");
  put_field(out, rec.patient_id, 80, "patient id");
  put_field(out, rec.recording_id, 80, "recording id");
  put_field(out, rec.start_date, 8, "start date");
  put_field(out, rec.start_time, 8, "start time");
  put_field(out, format_int(static_cast<long>(total_header), 8, "header byte count"), 8,
            "header byte count");
  put_field(out, rec.reserved, 44, "reserved");
  put_field(out, format_int(rec.num_records, 8, "record count"), 8, "record count");
  put_field(out, format_real(rec.record_duration_s, 8, "record duration"), 8, "record duration");
  put_field(out, format_int(static_cast<long>(n), 4, "signal count"), 4, "signal count");

  auto each = [&](std::size_t len, const char* what, auto&& render) {
    for (std::size_t i = 0; i < n; ++i) put_field(out, render(rec.signals[i]), len, what);
  };
  each(16, "label", [](const SignalDef& s) { return s.label; });
  each(80, "transducer", [](const SignalDef& s) { return s.transducer; });
  each(8, "physical dimension", [](const SignalDef& s) { return s.physical_dimension; });
  each(8, "physical minimum",
       [](const SignalDef& s) { return format_real(s.physical_min, 8, "physical minimum"); });
  each(8, "physical maximum",
       [](const SignalDef& s) { return format_real(s.physical_max, 8, "physical maximum"); });
  each(8, "digital minimum",
       [](const SignalDef& s) { return format_int(s.digital_min, 8, "digital minimum"); });
  each(8, "digital maximum",
       [](const SignalDef& s) { return format_int(s.digital_max, 8, "digital maximum"); });
  each(80, "prefilter", [](const SignalDef& s) { return s.prefilter; });
  each(8, "samples per record",
       [](const SignalDef& s) { return format_int(s.samples_per_record, 8, "samples per record"); });
  each(32, "signal reserved", [](const SignalDef& s) { return s.reserved; });

  for (int r = 0; r < rec.num_records; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t spr = static_cast<std::size_t>(rec.signals[i].samples_per_record);
      const std::int16_t* src = rec.samples[i].data() + static_cast<std::size_t>(r) * spr;
      for (std::size_t k = 0; k < spr; ++k) {
        const std::uint16_t u = static_cast<std::uint16_t>(src[k]);
        out.push_back(static_cast<std::uint8_t>(u & 0xff));
        out.push_back(static_cast<std::uint8_t>(u >> 8));
      }
    }
  }
  return out;
}

// ============================================================
// Files and channel extraction
// ============================================================

Recording read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_recording(bytes);
}

void write_file(const Recording& rec, const std::string& path) {
  const std::vector<std::uint8_t> bytes = write_recording(rec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot create '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to '" + path + "'");
}

SampleSeries extract_channel(const Recording& rec, const std::string& label) {
  const std::string wanted = trim(label);
  const SignalDef* found = nullptr;
  std::size_t found_index = 0;
  for (std::size_t i = 0; i < rec.signals.size(); ++i) {
    if (trim(rec.signals[i].label) == wanted) {
      if (found) throw AmbiguousChannel("label '" + wanted + "' appears more than once");
      found = &rec.signals[i];
      found_index = i;
    }
  }
  if (!found) throw UnknownChannel("no signal labeled '" + wanted + "'");
  if (is_annotation_signal(*found)) {
    throw UnknownChannel("'" + wanted + "' is an annotation signal, not a data channel");
  }

  const double scale = (found->physical_max - found->physical_min) /
                       (static_cast<double>(found->digital_max) - found->digital_min);
  SampleSeries out;
  out.rate_hz = sampling_rate_hz(rec, *found);
  const std::vector<std::int16_t>& raw = rec.samples[found_index];
  out.samples.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out.samples[i] = found->physical_min + (static_cast<double>(raw[i]) - found->digital_min) * scale;
  }
  return out;
}

}  // namespace somnus::edf
