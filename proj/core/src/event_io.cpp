#include "cwhom/event_io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <fmt/format.h>

#include "cwhom/errors.hpp"

namespace cwhom::event_io {
namespace {

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}

std::uint64_t get_u64(const std::string& in, std::size_t offset) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | static_cast<unsigned char>(in[offset + static_cast<std::size_t>(i)]);
    }
    return v;
}

}  // namespace

std::vector<PhotonEvent> interleave(const std::vector<TimestampPs>& a,
                                    const std::vector<TimestampPs>& b) {
    std::vector<PhotonEvent> out;
    out.reserve(a.size() + b.size());
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        if (j == b.size() || (i < a.size() && a[i] <= b[j])) {
            out.push_back({a[i++], Channel::A});
        } else {
            out.push_back({b[j++], Channel::B});
        }
    }
    return out;
}

std::string encode_binary(const EventFile& file) {
    const auto records = interleave(file.events_a, file.events_b);
    std::string out;
    out.reserve(kHeaderBytes + records.size() * kRecordBytes);
    out.append(kMagic, sizeof kMagic);
    put_u64(out, static_cast<std::uint64_t>(file.duration_ps));
    put_u64(out, records.size());
    put_u64(out, 0);
    for (const auto& r : records) {
        put_u64(out, static_cast<std::uint64_t>(r.timestamp_ps));
        out.push_back(static_cast<char>(r.channel));
        out.append(7, '\0');
    }
    return out;
}

EventFile decode_binary(const std::string& bytes) {
    if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw FormatError("event file does not start with magic CWHOMEV1");
    }
    EventFile file;
    file.duration_ps = static_cast<TimestampPs>(get_u64(bytes, 8));
    const std::uint64_t count = get_u64(bytes, 16);
    if (bytes.size() != kHeaderBytes + count * kRecordBytes) {
        throw FormatError(fmt::format("event file holds {} bytes, header announces {} records",
                                      bytes.size(), count));
    }
    for (std::uint64_t k = 0; k < count; ++k) {
        const std::size_t offset = kHeaderBytes + k * kRecordBytes;
        const auto t = static_cast<TimestampPs>(get_u64(bytes, offset));
        const auto channel = static_cast<unsigned char>(bytes[offset + 8]);
        if (channel == 0) {
            file.events_a.push_back(t);
        } else if (channel == 1) {
            file.events_b.push_back(t);
        } else {
            throw FormatError(fmt::format("record {} has invalid channel {}", k, channel));
        }
    }
    return file;
}

std::string encode_csv(const EventFile& file) {
    std::string out = "timestamp_ps,channel\n";
    for (const auto& r : interleave(file.events_a, file.events_b)) {
        out += fmt::format("{},{}\n", r.timestamp_ps, r.channel == Channel::A ? 'A' : 'B');
    }
    return out;
}

EventFile decode_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("timestamp_ps,channel", 0) != 0) {
        throw FormatError("event CSV must start with header timestamp_ps,channel");
    }
    EventFile file;
    std::size_t line_no = 1;
    TimestampPs last = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos || comma + 1 >= line.size()) {
            throw FormatError(fmt::format("event CSV line {} is malformed", line_no));
        }
        TimestampPs t = 0;
        try {
            t = std::stoll(line.substr(0, comma));
        } catch (const std::exception&) {
            throw FormatError(fmt::format("event CSV line {} has a bad timestamp", line_no));
        }
        const char ch = line[comma + 1];
        if (ch == 'A' || ch == '0') {
            file.events_a.push_back(t);
        } else if (ch == 'B' || ch == '1') {
            file.events_b.push_back(t);
        } else {
            throw FormatError(fmt::format("event CSV line {} has unknown channel '{}'", line_no, ch));
        }
        last = std::max(last, t);
    }
    file.duration_ps = last + 1;
    return file;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

EventFile read_events(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() >= sizeof kMagic && std::memcmp(bytes.data(), kMagic, sizeof kMagic) == 0) {
        return decode_binary(bytes);
    }
    return decode_csv(bytes);
}

void write_events(const std::filesystem::path& path, const EventFile& file, bool csv) {
    write_file(path, csv ? encode_csv(file) : encode_binary(file));
}

}  // namespace cwhom::event_io
