#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "somnus/common.hpp"
#include "somnus/types.hpp"

// EDF/EDF+ container support: fixed-width ASCII headers, int16 little-endian
// data records, linear digital-to-physical scaling. Annotation signals are
// carried through untouched so round-trips stay byte-exact, but they are not
// usable as data channels.

namespace somnus::edf {

SOMNUS_DEFINE_ERROR(TruncatedFile);
SOMNUS_DEFINE_ERROR(MalformedHeader);
SOMNUS_DEFINE_ERROR(InconsistentSignalCount);
SOMNUS_DEFINE_ERROR(RangeOverflow);
SOMNUS_DEFINE_ERROR(UnknownChannel);
SOMNUS_DEFINE_ERROR(AmbiguousChannel);

struct SignalDef {
  std::string label;
  std::string transducer;
  std::string physical_dimension;
  double physical_min = 0.0;
  double physical_max = 0.0;
  int digital_min = 0;
  int digital_max = 0;
  std::string prefilter;
  int samples_per_record = 0;
  std::string reserved;
};

struct Recording {
  std::string patient_id;
  std::string recording_id;
  std::string start_date = "01.01.00";  // dd.mm.yy
  std::string start_time = "00.00.00";  // hh.mm.ss
  std::string reserved;                 // "EDF+C" etc., usually empty
  int num_records = 0;
  double record_duration_s = 1.0;
  std::vector<SignalDef> signals;
  // Raw digital samples per signal, num_records * samples_per_record each.
  std::vector<std::vector<std::int16_t>> samples;
};

bool is_annotation_signal(const SignalDef& sd);
double sampling_rate_hz(const Recording& rec, const SignalDef& sd);

// Full-file parse. Throws TruncatedFile / MalformedHeader /
// InconsistentSignalCount on the conditions their names describe.
Recording parse_recording(const std::vector<std::uint8_t>& bytes);

// Inverse of parse_recording. Numeric header fields are written in a
// canonical form chosen so that write(parse(write(r))) is byte-identical.
// Throws RangeOverflow if a sample falls outside its digital range,
// MalformedHeader for unrepresentable fields or an empty signal list,
// InconsistentSignalCount if sample counts disagree with the header.
std::vector<std::uint8_t> write_recording(const Recording& rec);

// File convenience wrappers.
Recording read_file(const std::string& path);
void write_file(const Recording& rec, const std::string& path);

// Physical-unit samples for the unique signal with this label (labels are
// compared after trimming ASCII whitespace). UnknownChannel if absent or an
// annotation signal, AmbiguousChannel if the label appears more than once.
SampleSeries extract_channel(const Recording& rec, const std::string& label);

}  // namespace somnus::edf
