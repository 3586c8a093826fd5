// src/wav.cpp

// Copyright 2026  The textmdd Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "mdd/error.hpp"
#include "mdd/features.hpp"
#include "mdd/le_io.hpp"

namespace mdd {

Waveform ReadWav(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open audio file " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto fail = [&](const std::string &why) { throw DataError(path + ": " + why); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    fail("not a RIFF/WAVE file");

  le::Reader r(bytes.data(), bytes.size());
  r.skip(12);
  int channels = 0, bits = 0, format = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (r.remaining() >= 8) {
    char id[4];
    r.bytes(id, 4);
    const std::uint32_t size = r.u32();
    if (size > r.remaining()) fail("truncated chunk");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16) fail("short fmt chunk");
      format = r.u16();
      channels = r.u16();
      rate = r.u32();
      r.skip(6);  // byte rate, block align
      bits = r.u16();
      r.skip(size - 16);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) fail("data chunk before fmt chunk");
      if (format != 1 || channels != 1 || bits != 16) fail("only 16-bit PCM mono is supported");
      Waveform w;
      w.sample_rate = static_cast<int>(rate);
      w.samples.resize(size / 2);
      for (auto &s : w.samples) s = static_cast<double>(static_cast<std::int16_t>(r.u16())) / 32768.0;
      return w;
    } else {
      r.skip(size + (size & 1));
    }
  }
  fail("no data chunk");
  return {};
}

void WriteWav(const std::string &path, const Waveform &wave) {
  le::Writer w;
  const auto data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  w.bytes("RIFF", 4);
  w.u32(36 + data_bytes);
  w.bytes("WAVE", 4);
  w.bytes("fmt ", 4);
  w.u32(16);
  w.u16(1);
  w.u16(1);
  w.u32(static_cast<std::uint32_t>(wave.sample_rate));
  w.u32(static_cast<std::uint32_t>(wave.sample_rate) * 2);
  w.u16(2);
  w.u16(16);
  w.bytes("data", 4);
  w.u32(data_bytes);
  for (double s : wave.samples) {
    const double scaled = std::round(std::clamp(s, -1.0, 32767.0 / 32768.0) * 32768.0);
    w.u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write audio file " + path);
  out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
}

}  // namespace mdd
