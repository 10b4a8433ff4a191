#pragma once

// Photon-event file formats.
//
// Binary: 32-byte header (magic "CWHOMEV1", u64 duration_ps, u64 record
// count, 8 reserved zero bytes) followed by 16-byte little-endian records
// (u64 timestamp_ps, u8 channel 0=A 1=B, 7 zero pad bytes), ordered by
// timestamp. CSV: header "timestamp_ps,channel", channel written as A or B.

#include <filesystem>
#include <string>
#include <vector>

#include "cwhom/lasersim.hpp"

namespace cwhom::event_io {

using lasersim::Channel;
using lasersim::PhotonEvent;
using lasersim::TimestampPs;

inline constexpr char kMagic[8] = {'C', 'W', 'H', 'O', 'M', 'E', 'V', '1'};
inline constexpr std::size_t kHeaderBytes = 32;
inline constexpr std::size_t kRecordBytes = 16;

struct EventFile {
    TimestampPs duration_ps = 0;
    std::vector<TimestampPs> events_a;
    std::vector<TimestampPs> events_b;
};

/// Interleaves two per-channel streams into one time-ordered record list
/// (A before B on equal timestamps).
std::vector<PhotonEvent> interleave(const std::vector<TimestampPs>& a,
                                    const std::vector<TimestampPs>& b);

std::string encode_binary(const EventFile& file);
EventFile decode_binary(const std::string& bytes);

std::string encode_csv(const EventFile& file);
/// CSV carries no duration; it is set to the last timestamp + 1 ps.
EventFile decode_csv(const std::string& text);

/// Chooses the format from the magic bytes.
EventFile read_events(const std::filesystem::path& path);
void write_events(const std::filesystem::path& path, const EventFile& file, bool csv);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace cwhom::event_io
