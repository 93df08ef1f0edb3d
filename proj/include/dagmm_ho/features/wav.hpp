#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dagmm_ho/numcore/binary_io.hpp"
#include "dagmm_ho/numcore/error.hpp"

namespace dagmm_ho {

struct AudioClip {
  std::vector<double> samples;  // in [-1, 1]
  std::uint32_t sample_rate = 0;

  double duration_seconds() const { return static_cast<double>(samples.size()) / sample_rate; }

  /// Samples in [begin, end), clamped to the clip.
  AudioClip slice(std::size_t begin, std::size_t end) const {
    end = std::min(end, samples.size());
    begin = std::min(begin, end);
    return {std::vector<double>(samples.begin() + static_cast<std::ptrdiff_t>(begin),
                                samples.begin() + static_cast<std::ptrdiff_t>(end)),
            sample_rate};
  }
};

/// Decodes RIFF/WAVE PCM 16-bit audio. Multichannel input is averaged to
/// mono; samples are scaled by 1/32768.
inline AudioClip decode_wav(std::vector<char> bytes) {
  ByteReader in(std::move(bytes));
  if (in.bytes(4) != "RIFF") throw FormatError("wav: missing RIFF tag");
  in.u32();
  if (in.bytes(4) != "WAVE") throw FormatError("wav: missing WAVE tag");

  bool have_fmt = false;
  std::uint16_t channels = 0;
  std::uint16_t bits = 0;
  std::uint32_t rate = 0;
  while (in.remaining() >= 8) {
    const std::string id = in.bytes(4);
    const std::uint32_t size = in.u32();
    if (id == "fmt ") {
      if (size < 16) throw FormatError("wav: fmt chunk too small");
      const std::uint32_t format_and_channels = in.u32();
      std::uint16_t format = format_and_channels & 0xffff;
      channels = static_cast<std::uint16_t>(format_and_channels >> 16);
      rate = in.u32();
      in.u32();  // byte rate
      const std::uint32_t align_and_bits = in.u32();
      bits = static_cast<std::uint16_t>(align_and_bits >> 16);
      std::uint32_t consumed = 16;
      if (format == 0xFFFE && size >= 40) {
        in.u32();  // cbSize + valid bits
        in.u32();  // channel mask
        format = static_cast<std::uint16_t>(in.u32() & 0xffff);  // sub-format GUID head
        in.bytes(12);
        consumed = 40;
      }
      if (size > consumed) in.bytes(size - consumed + (size & 1));
      if (format != 1) throw UnsupportedFormatError("wav: only PCM is supported (format tag " + std::to_string(format) + ")");
      if (bits != 16) throw UnsupportedFormatError("wav: only 16-bit samples are supported (got " + std::to_string(bits) + ")");
      if (channels == 0) throw FormatError("wav: zero channels");
      if (rate == 0) throw FormatError("wav: zero sample rate");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("wav: data chunk before fmt chunk");
      const std::size_t available = std::min<std::size_t>(size, in.remaining());
      const std::size_t frame_bytes = 2u * channels;
      const std::size_t frames = available / frame_bytes;
      AudioClip clip;
      clip.sample_rate = rate;
      clip.samples.resize(frames);
      const std::string raw = in.bytes(frames * frame_bytes);
      for (std::size_t f = 0; f < frames; ++f) {
        std::int32_t acc = 0;
        for (std::size_t ch = 0; ch < channels; ++ch) {
          const std::size_t off = (f * channels + ch) * 2;
          const auto lo = static_cast<std::uint16_t>(static_cast<unsigned char>(raw[off]));
          const auto hi = static_cast<std::uint16_t>(static_cast<unsigned char>(raw[off + 1]));
          acc += static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
        }
        clip.samples[f] = static_cast<double>(acc) / (32768.0 * channels);
      }
      return clip;
    } else {
      in.bytes(size + (size & 1));
    }
  }
  throw FormatError("wav: no data chunk");
}

inline AudioClip load_wav(const std::filesystem::path& path) {
  try {
    return decode_wav(read_file_bytes(path));
  } catch (const UnsupportedFormatError& e) {
    throw UnsupportedFormatError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline std::int16_t quantize_pcm16(double sample) {
  const double scaled = std::nearbyint(sample * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

/// Mono PCM 16-bit encoding. Values are rounded to the nearest k/32768.
inline std::vector<char> encode_wav(const AudioClip& clip) {
  ByteWriter out;
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  out.bytes("RIFF");
  out.u32(36 + data_bytes);
  out.bytes("WAVE");
  out.bytes("fmt ");
  out.u32(16);
  out.u32(1u | (1u << 16));  // PCM, mono
  out.u32(clip.sample_rate);
  out.u32(clip.sample_rate * 2);
  out.u32(2u | (16u << 16));  // block align, bits per sample
  out.bytes("data");
  out.u32(data_bytes);
  std::string payload(clip.samples.size() * 2, '\0');
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    const auto v = static_cast<std::uint16_t>(quantize_pcm16(clip.samples[i]));
    payload[2 * i] = static_cast<char>(v & 0xff);
    payload[2 * i + 1] = static_cast<char>(v >> 8);
  }
  out.bytes(payload);
  return out.buffer();
}

inline void save_wav(const std::filesystem::path& path, const AudioClip& clip) {
  write_file_atomic(path, encode_wav(clip));
}

}  // namespace dagmm_ho
