#include "postgan/wav.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace postgan::wav {

namespace {

void write_u16(std::ofstream& out, uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

void write_u32(std::ofstream& out, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

uint16_t read_u16(std::ifstream& in, const std::string& path) {
  unsigned char b[2];
  if (!in.read(reinterpret_cast<char*>(b), 2))
    throw std::runtime_error("wav: truncated file: " + path);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t read_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("wav: truncated file: " + path);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("wav: cannot open " + path);

  char tag[4];
  if (!in.read(tag, 4) || std::memcmp(tag, "RIFF", 4) != 0)
    throw std::runtime_error("wav: not a RIFF file: " + path);
  read_u32(in, path);  // overall size, unused
  if (!in.read(tag, 4) || std::memcmp(tag, "WAVE", 4) != 0)
    throw std::runtime_error("wav: not a WAVE file: " + path);

  WavData data;
  uint16_t audio_format = 0, bits = 0;
  bool have_fmt = false;
  while (in.read(tag, 4)) {
    const uint32_t chunk_size = read_u32(in, path);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw std::runtime_error("wav: malformed fmt chunk: " + path);
      audio_format = read_u16(in, path);
      data.channels = read_u16(in, path);
      data.sample_rate = static_cast<int>(read_u32(in, path));
      read_u32(in, path);  // byte rate
      read_u16(in, path);  // block align
      bits = read_u16(in, path);
      in.seekg(chunk_size - 16 + (chunk_size & 1), std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw std::runtime_error("wav: data before fmt: " + path);
      if (audio_format == 1 && bits == 16) {
        data.format = SampleFormat::kPcm16;
        const uint32_t count = chunk_size / 2;
        data.samples.resize(count);
        std::vector<unsigned char> raw(chunk_size);
        if (!in.read(reinterpret_cast<char*>(raw.data()), chunk_size))
          throw std::runtime_error("wav: truncated data chunk: " + path);
        for (uint32_t i = 0; i < count; ++i) {
          const int16_t s =
              static_cast<int16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
          data.samples[i] = static_cast<float>(s) / 32768.0f;
        }
      } else if (audio_format == 3 && bits == 32) {
        data.format = SampleFormat::kFloat32;
        const uint32_t count = chunk_size / 4;
        data.samples.resize(count);
        std::vector<unsigned char> raw(chunk_size);
        if (!in.read(reinterpret_cast<char*>(raw.data()), chunk_size))
          throw std::runtime_error("wav: truncated data chunk: " + path);
        for (uint32_t i = 0; i < count; ++i) {
          uint32_t u = static_cast<uint32_t>(raw[4 * i]) |
                       (static_cast<uint32_t>(raw[4 * i + 1]) << 8) |
                       (static_cast<uint32_t>(raw[4 * i + 2]) << 16) |
                       (static_cast<uint32_t>(raw[4 * i + 3]) << 24);
          float f;
          std::memcpy(&f, &u, 4);
          data.samples[i] = f;
        }
      } else {
        throw std::runtime_error("wav: unsupported encoding (want PCM16 or float32): " +
                                 path);
      }
      if (data.channels <= 0)
        throw std::runtime_error("wav: invalid channel count: " + path);
      return data;
    } else {
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  throw std::runtime_error("wav: no data chunk: " + path);
}

void write_wav(const std::string& path, const WavData& data) {
  if (data.channels <= 0) throw std::invalid_argument("wav: invalid channel count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("wav: cannot create " + path);

  const bool pcm = data.format == SampleFormat::kPcm16;
  const uint32_t bytes_per_sample = pcm ? 2 : 4;
  const uint32_t payload =
      static_cast<uint32_t>(data.samples.size()) * bytes_per_sample;

  out.write("RIFF", 4);
  write_u32(out, 36 + payload);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, pcm ? 1 : 3);
  write_u16(out, static_cast<uint16_t>(data.channels));
  write_u32(out, static_cast<uint32_t>(data.sample_rate));
  write_u32(out, static_cast<uint32_t>(data.sample_rate) * data.channels *
                     bytes_per_sample);
  write_u16(out, static_cast<uint16_t>(data.channels * bytes_per_sample));
  write_u16(out, static_cast<uint16_t>(bytes_per_sample * 8));
  out.write("data", 4);
  write_u32(out, payload);

  if (pcm) {
    for (const float f : data.samples) {
      long v = std::lround(static_cast<double>(f) * 32768.0);
      if (v > 32767) v = 32767;
      if (v < -32768) v = -32768;
      const int16_t s = static_cast<int16_t>(v);
      const char b[2] = {static_cast<char>(s & 0xff),
                         static_cast<char>((s >> 8) & 0xff)};
      out.write(b, 2);
    }
  } else {
    for (const float f : data.samples) {
      uint32_t u;
      std::memcpy(&u, &f, 4);
      char b[4];
      for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((u >> (8 * i)) & 0xff);
      out.write(b, 4);
    }
  }
  if (!out) throw std::runtime_error("wav: write failed: " + path);
}

}  // namespace postgan::wav
