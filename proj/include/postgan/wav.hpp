#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace postgan::wav {

enum class SampleFormat { kPcm16, kFloat32 };

// Interleaved audio as floats in [-1, 1). PCM16 payloads are scaled by
// 1/32768 on read and rounded back on write, so a read/write cycle is
// bit-exact for both formats.
struct WavData {
  int sample_rate = 16000;
  int channels = 1;
  SampleFormat format = SampleFormat::kPcm16;
  std::vector<float> samples;  // frame-interleaved

  int64_t frames() const {
    return channels > 0 ? static_cast<int64_t>(samples.size()) / channels : 0;
  }
};

WavData read_wav(const std::string& path);
void write_wav(const std::string& path, const WavData& data);

}  // namespace postgan::wav
