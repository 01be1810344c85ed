#include "disprobe/jpeg_codec.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>

namespace disprobe {

namespace {

// ---------------------------------------------------------------- tables

const uint8_t kZigzag[64] = {
    0,  1,  8,  16, 9,  2,  3,  10, 17, 24, 32, 25, 18, 11, 4,  5,
    12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6,  7,  14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63};

const uint8_t kLumaQuant[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

const uint8_t kChromaQuant[64] = {
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

// Annex K Huffman specs: (bits[1..16], values)
const uint8_t kDcLumaBits[17] = {0, 0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
const uint8_t kDcLumaVals[12] = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
const uint8_t kDcChromaBits[17] = {0, 0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
const uint8_t kDcChromaVals[12] = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};

const uint8_t kAcLumaBits[17] = {0, 0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7d};
const uint8_t kAcLumaVals[162] = {
    0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06,
    0x13, 0x51, 0x61, 0x07, 0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xa1, 0x08,
    0x23, 0x42, 0xb1, 0xc1, 0x15, 0x52, 0xd1, 0xf0, 0x24, 0x33, 0x62, 0x72,
    0x82, 0x09, 0x0a, 0x16, 0x17, 0x18, 0x19, 0x1a, 0x25, 0x26, 0x27, 0x28,
    0x29, 0x2a, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44, 0x45,
    0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59,
    0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75,
    0x76, 0x77, 0x78, 0x79, 0x7a, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89,
    0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9a, 0xa2, 0xa3,
    0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6,
    0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3, 0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9,
    0xca, 0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe1, 0xe2,
    0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf1, 0xf2, 0xf3, 0xf4,
    0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa};

const uint8_t kAcChromaBits[17] = {0, 0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77};
const uint8_t kAcChromaVals[162] = {
    0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21, 0x31, 0x06, 0x12, 0x41,
    0x51, 0x07, 0x61, 0x71, 0x13, 0x22, 0x32, 0x81, 0x08, 0x14, 0x42, 0x91,
    0xa1, 0xb1, 0xc1, 0x09, 0x23, 0x33, 0x52, 0xf0, 0x15, 0x62, 0x72, 0xd1,
    0x0a, 0x16, 0x24, 0x34, 0xe1, 0x25, 0xf1, 0x17, 0x18, 0x19, 0x1a, 0x26,
    0x27, 0x28, 0x29, 0x2a, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44,
    0x45, 0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58,
    0x59, 0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74,
    0x75, 0x76, 0x77, 0x78, 0x79, 0x7a, 0x82, 0x83, 0x84, 0x85, 0x86, 0x87,
    0x88, 0x89, 0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9a,
    0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4,
    0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3, 0xc4, 0xc5, 0xc6, 0xc7,
    0xc8, 0xc9, 0xca, 0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda,
    0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf2, 0xf3, 0xf4,
    0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa};

// Output table is in zigzag order (DQT payload order); base is row-major.
void scale_quant_table(const uint8_t* base, int quality, uint16_t* out) {
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  for (int i = 0; i < 64; ++i) {
    int v = (base[kZigzag[i]] * scale + 50) / 100;
    out[i] = static_cast<uint16_t>(std::clamp(v, 1, 255));
  }
}

// ------------------------------------------------------------ DCT pair

void fdct8x8(const double* in, double* out) {
  static double cosv[8][8];
  static bool init = false;
  if (!init) {
    for (int u = 0; u < 8; ++u)
      for (int x = 0; x < 8; ++x)
        cosv[u][x] = std::cos((2 * x + 1) * u * M_PI / 16.0);
    init = true;
  }
  double tmp[64];
  for (int u = 0; u < 8; ++u)
    for (int x = 0; x < 8; ++x) {
      double acc = 0.0;
      for (int k = 0; k < 8; ++k) acc += in[x * 8 + k] * cosv[u][k];
      tmp[x * 8 + u] = acc;
    }
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      double acc = 0.0;
      for (int k = 0; k < 8; ++k) acc += tmp[k * 8 + v] * cosv[u][k];
      const double cu = u == 0 ? M_SQRT1_2 : 1.0;
      const double cv = v == 0 ? M_SQRT1_2 : 1.0;
      out[u * 8 + v] = 0.25 * cu * cv * acc;
    }
}

void idct8x8(const double* in, double* out) {
  static double cosv[8][8];
  static bool init = false;
  if (!init) {
    for (int u = 0; u < 8; ++u)
      for (int x = 0; x < 8; ++x)
        cosv[u][x] = std::cos((2 * x + 1) * u * M_PI / 16.0);
    init = true;
  }
  double tmp[64];
  for (int u = 0; u < 8; ++u)
    for (int y = 0; y < 8; ++y) {
      double acc = 0.0;
      for (int v = 0; v < 8; ++v) {
        const double cv = v == 0 ? M_SQRT1_2 : 1.0;
        acc += cv * in[u * 8 + v] * cosv[v][y];
      }
      tmp[u * 8 + y] = acc;
    }
  for (int x = 0; x < 8; ++x)
    for (int y = 0; y < 8; ++y) {
      double acc = 0.0;
      for (int u = 0; u < 8; ++u) {
        const double cu = u == 0 ? M_SQRT1_2 : 1.0;
        acc += cu * tmp[u * 8 + y] * cosv[u][x];
      }
      out[x * 8 + y] = 0.25 * acc;
    }
}

// ------------------------------------------------------------- encoder

struct HuffCode {
  uint16_t code[256];
  uint8_t len[256];
};

HuffCode build_codes(const uint8_t* bits, const uint8_t* vals) {
  HuffCode hc{};
  int code = 0, k = 0;
  for (int l = 1; l <= 16; ++l) {
    for (int i = 0; i < bits[l]; ++i) {
      hc.code[vals[k]] = static_cast<uint16_t>(code);
      hc.len[vals[k]] = static_cast<uint8_t>(l);
      ++code;
      ++k;
    }
    code <<= 1;
  }
  return hc;
}

class BitWriter {
 public:
  explicit BitWriter(std::vector<uint8_t>& out) : out_(out) {}
  void put(uint32_t bits, int n) {
    buf_ = (buf_ << n) | (bits & ((1u << n) - 1));
    nbits_ += n;
    while (nbits_ >= 8) {
      uint8_t b = static_cast<uint8_t>((buf_ >> (nbits_ - 8)) & 0xff);
      out_.push_back(b);
      if (b == 0xff) out_.push_back(0x00);
      nbits_ -= 8;
    }
  }
  void flush() {
    if (nbits_ > 0) {
      const int pad = 8 - nbits_;
      put((1u << pad) - 1, pad);  // pad with ones
    }
  }

 private:
  std::vector<uint8_t>& out_;
  uint64_t buf_ = 0;
  int nbits_ = 0;
};

int bit_length(int v) {
  int a = std::abs(v), n = 0;
  while (a) {
    ++n;
    a >>= 1;
  }
  return n;
}

void encode_block(BitWriter& bw, const double* block, const uint16_t* quant,
                  const HuffCode& dc, const HuffCode& ac, int* dc_pred) {
  double freq[64];
  fdct8x8(block, freq);
  int q[64];
  for (int i = 0; i < 64; ++i)
    q[i] = static_cast<int>(std::lround(freq[kZigzag[i]] / quant[i]));

  const int diff = q[0] - *dc_pred;
  *dc_pred = q[0];
  const int dlen = bit_length(diff);
  bw.put(dc.code[dlen], dc.len[dlen]);
  if (dlen) bw.put(diff < 0 ? diff + (1 << dlen) - 1 : diff, dlen);

  int run = 0;
  for (int i = 1; i < 64; ++i) {
    if (q[i] == 0) {
      ++run;
      continue;
    }
    while (run >= 16) {
      bw.put(ac.code[0xf0], ac.len[0xf0]);  // ZRL
      run -= 16;
    }
    const int alen = bit_length(q[i]);
    const int sym = (run << 4) | alen;
    bw.put(ac.code[sym], ac.len[sym]);
    bw.put(q[i] < 0 ? q[i] + (1 << alen) - 1 : q[i], alen);
    run = 0;
  }
  if (run > 0) bw.put(ac.code[0x00], ac.len[0x00]);  // EOB
}

void put16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v & 0xff));
}

void write_dht(std::vector<uint8_t>& out, uint8_t cls_id, const uint8_t* bits,
               const uint8_t* vals, int nvals) {
  out.push_back(0xff);
  out.push_back(0xc4);
  put16(out, static_cast<uint16_t>(2 + 1 + 16 + nvals));
  out.push_back(cls_id);
  for (int i = 1; i <= 16; ++i) out.push_back(bits[i]);
  out.insert(out.end(), vals, vals + nvals);
}

}  // namespace

std::vector<uint8_t> encode_jpeg(const ImageBuffer& rgb, int quality) {
  if (quality < 1 || quality > 100)
    throw ConfigError("jpeg: quality must be in 1..100");
  if (rgb.channels != 3) throw EncodeError("jpeg: encoder expects 3 channels");
  const int h = rgb.height, w = rgb.width;
  if (h < 1 || w < 1) throw EncodeError("jpeg: empty image");

  uint16_t lq[64], cq[64];
  scale_quant_table(kLumaQuant, quality, lq);
  scale_quant_table(kChromaQuant, quality, cq);

  // Full-resolution YCbCr planes, level-shifted to [-128,127].
  const int ph = (h + 15) / 16 * 16, pw = (w + 15) / 16 * 16;
  std::vector<double> Y(static_cast<size_t>(ph) * pw);
  std::vector<double> Cb(Y.size()), Cr(Y.size());
  for (int y = 0; y < ph; ++y) {
    const int sy = std::min(y, h - 1);
    for (int x = 0; x < pw; ++x) {
      const int sx = std::min(x, w - 1);
      const double r = std::clamp(rgb.at(sy, sx, 0), 0.0, 1.0) * 255.0;
      const double g = std::clamp(rgb.at(sy, sx, 1), 0.0, 1.0) * 255.0;
      const double b = std::clamp(rgb.at(sy, sx, 2), 0.0, 1.0) * 255.0;
      Y[static_cast<size_t>(y) * pw + x] =
          0.299 * r + 0.587 * g + 0.114 * b - 128.0;
      Cb[static_cast<size_t>(y) * pw + x] =
          -0.168736 * r - 0.331264 * g + 0.5 * b;
      Cr[static_cast<size_t>(y) * pw + x] =
          0.5 * r - 0.418688 * g - 0.081312 * b;
    }
  }

  std::vector<uint8_t> out;
  out.push_back(0xff);
  out.push_back(0xd8);  // SOI
  // APP0 / JFIF
  const uint8_t app0[] = {0xff, 0xe0, 0x00, 0x10, 'J',  'F',  'I',  'F',
                          0x00, 0x01, 0x01, 0x00, 0x00, 0x01, 0x00, 0x01,
                          0x00, 0x00};
  out.insert(out.end(), app0, app0 + sizeof app0);
  // DQT
  for (int t = 0; t < 2; ++t) {
    out.push_back(0xff);
    out.push_back(0xdb);
    put16(out, 2 + 1 + 64);
    out.push_back(static_cast<uint8_t>(t));
    const uint16_t* q = t == 0 ? lq : cq;
    for (int i = 0; i < 64; ++i) out.push_back(static_cast<uint8_t>(q[i]));
  }
  // SOF0: Y 2x2 q0, Cb 1x1 q1, Cr 1x1 q1
  out.push_back(0xff);
  out.push_back(0xc0);
  put16(out, 2 + 6 + 3 * 3);
  out.push_back(8);
  put16(out, static_cast<uint16_t>(h));
  put16(out, static_cast<uint16_t>(w));
  out.push_back(3);
  const uint8_t sof_comp[] = {1, 0x22, 0, 2, 0x11, 1, 3, 0x11, 1};
  out.insert(out.end(), sof_comp, sof_comp + sizeof sof_comp);
  // DHT
  write_dht(out, 0x00, kDcLumaBits, kDcLumaVals, 12);
  write_dht(out, 0x10, kAcLumaBits, kAcLumaVals, 162);
  write_dht(out, 0x01, kDcChromaBits, kDcChromaVals, 12);
  write_dht(out, 0x11, kAcChromaBits, kAcChromaVals, 162);
  // SOS
  out.push_back(0xff);
  out.push_back(0xda);
  put16(out, 2 + 1 + 3 * 2 + 3);
  out.push_back(3);
  const uint8_t sos_comp[] = {1, 0x00, 2, 0x11, 3, 0x11};
  out.insert(out.end(), sos_comp, sos_comp + sizeof sos_comp);
  out.push_back(0);
  out.push_back(63);
  out.push_back(0);

  const HuffCode dcl = build_codes(kDcLumaBits, kDcLumaVals);
  const HuffCode acl = build_codes(kAcLumaBits, kAcLumaVals);
  const HuffCode dcc = build_codes(kDcChromaBits, kDcChromaVals);
  const HuffCode acc = build_codes(kAcChromaBits, kAcChromaVals);

  BitWriter bw(out);
  int dc_y = 0, dc_cb = 0, dc_cr = 0;
  double block[64];
  for (int my = 0; my < ph; my += 16) {
    for (int mx = 0; mx < pw; mx += 16) {
      // four luma blocks
      for (int by = 0; by < 2; ++by)
        for (int bx = 0; bx < 2; ++bx) {
          for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x)
              block[y * 8 + x] =
                  Y[static_cast<size_t>(my + by * 8 + y) * pw + mx + bx * 8 + x];
          encode_block(bw, block, lq, dcl, acl, &dc_y);
        }
      // chroma: 2x2 box average
      for (int plane = 0; plane < 2; ++plane) {
        const std::vector<double>& src = plane == 0 ? Cb : Cr;
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x) {
            const size_t p = static_cast<size_t>(my + 2 * y) * pw + mx + 2 * x;
            block[y * 8 + x] =
                0.25 * (src[p] + src[p + 1] + src[p + pw] + src[p + pw + 1]);
          }
        encode_block(bw, block, cq, plane == 0 ? dcc : dcc,
                     plane == 0 ? acc : acc, plane == 0 ? &dc_cb : &dc_cr);
      }
    }
  }
  bw.flush();
  out.push_back(0xff);
  out.push_back(0xd9);  // EOI
  return out;
}

// ------------------------------------------------------------- decoder

namespace {

struct HuffTable {
  // Canonical decode: min/max code and value offset per length.
  int32_t mincode[17];
  int32_t maxcode[17];
  int32_t valptr[17];
  uint8_t vals[256];
  bool present = false;
};

HuffTable build_decode_table(const uint8_t* bits, const uint8_t* vals,
                             int nvals) {
  HuffTable t{};
  int code = 0, k = 0;
  for (int l = 1; l <= 16; ++l) {
    t.valptr[l] = k;
    t.mincode[l] = code;
    code += bits[l];
    k += bits[l];
    t.maxcode[l] = code - 1;
    if (bits[l] == 0) t.maxcode[l] = -1;
    code <<= 1;
  }
  std::memcpy(t.vals, vals, static_cast<size_t>(nvals));
  t.present = true;
  return t;
}

class BitReader {
 public:
  BitReader(const std::vector<uint8_t>& data, size_t pos)
      : data_(data), pos_(pos) {}

  int next_bit() {
    if (nbits_ == 0) {
      if (pos_ >= data_.size()) throw FormatError("jpeg: truncated scan");
      uint8_t b = data_[pos_++];
      if (b == 0xff) {
        if (pos_ >= data_.size()) throw FormatError("jpeg: truncated scan");
        uint8_t m = data_[pos_++];
        if (m == 0x00) {
          // stuffed byte
        } else if (m >= 0xd0 && m <= 0xd7) {
          throw FormatError("jpeg: unexpected restart marker mid-symbol");
        } else {
          // marker reached; feed zero bits (spec-sanctioned at end of scan)
          pos_ -= 2;
          marker_hit_ = true;
          b = 0;
        }
      }
      buf_ = b;
      nbits_ = 8;
    }
    --nbits_;
    return (buf_ >> nbits_) & 1;
  }

  int receive(int n) {
    int v = 0;
    for (int i = 0; i < n; ++i) v = (v << 1) | next_bit();
    return v;
  }

  void align_and_expect_rst(int n) {
    nbits_ = 0;
    if (pos_ + 1 >= data_.size()) throw FormatError("jpeg: truncated scan");
    if (data_[pos_] != 0xff || data_[pos_ + 1] != 0xd0 + n)
      throw FormatError("jpeg: missing restart marker");
    pos_ += 2;
  }

  size_t pos() const { return pos_; }

 private:
  const std::vector<uint8_t>& data_;
  size_t pos_;
  uint8_t buf_ = 0;
  int nbits_ = 0;
  bool marker_hit_ = false;
};

int decode_huff(BitReader& br, const HuffTable& t) {
  int code = br.next_bit();
  for (int l = 1; l <= 16; ++l) {
    if (t.maxcode[l] >= 0 && code <= t.maxcode[l])
      return t.vals[t.valptr[l] + code - t.mincode[l]];
    code = (code << 1) | br.next_bit();
  }
  throw FormatError("jpeg: invalid huffman code");
}

int extend(int v, int n) { return v < (1 << (n - 1)) ? v - (1 << n) + 1 : v; }

struct Component {
  int id, hs, vs, quant_id;
  int dc_table = 0, ac_table = 0;
  int dc_pred = 0;
  int blocks_w = 0, blocks_h = 0;
  std::vector<double> plane;  // blocks_h*8 x blocks_w*8 samples
};

}  // namespace

ImageBuffer decode_jpeg(const std::vector<uint8_t>& bytes) {
  size_t pos = 0;
  auto u8 = [&]() -> uint8_t {
    if (pos >= bytes.size()) throw FormatError("jpeg: truncated stream");
    return bytes[pos++];
  };
  auto u16 = [&]() -> int {
    int hi = u8(), lo = u8();
    return (hi << 8) | lo;
  };

  if (u8() != 0xff || u8() != 0xd8) throw FormatError("jpeg: missing SOI");

  uint16_t quant[4][64] = {};
  bool quant_present[4] = {};
  HuffTable dc_tables[4], ac_tables[4];
  std::vector<Component> comps;
  int height = 0, width = 0, restart_interval = 0;
  int hmax = 0, vmax = 0;
  bool sof_seen = false;

  for (;;) {
    uint8_t b = u8();
    if (b != 0xff) continue;  // skip fill
    uint8_t marker = u8();
    while (marker == 0xff) marker = u8();
    if (marker == 0xd9) throw FormatError("jpeg: EOI before scan");
    if (marker == 0x01 || (marker >= 0xd0 && marker <= 0xd7)) continue;

    const int len = u16();
    const size_t seg_end = pos + len - 2;
    if (seg_end > bytes.size()) throw FormatError("jpeg: truncated segment");

    if (marker == 0xdb) {  // DQT
      while (pos < seg_end) {
        const uint8_t pq_tq = u8();
        const int prec = pq_tq >> 4, id = pq_tq & 0x0f;
        if (id > 3) throw FormatError("jpeg: bad quant table id");
        for (int i = 0; i < 64; ++i)
          quant[id][i] = prec ? static_cast<uint16_t>(u16())
                              : static_cast<uint16_t>(u8());
        quant_present[id] = true;
      }
    } else if (marker == 0xc4) {  // DHT
      while (pos < seg_end) {
        const uint8_t tc_th = u8();
        const int cls = tc_th >> 4, id = tc_th & 0x0f;
        if (id > 3) throw FormatError("jpeg: bad huffman table id");
        uint8_t bits[17] = {};
        int nvals = 0;
        for (int l = 1; l <= 16; ++l) {
          bits[l] = u8();
          nvals += bits[l];
        }
        if (nvals > 256) throw FormatError("jpeg: bad huffman table");
        uint8_t vals[256];
        for (int i = 0; i < nvals; ++i) vals[i] = u8();
        (cls == 0 ? dc_tables : ac_tables)[id] =
            build_decode_table(bits, vals, nvals);
      }
    } else if (marker == 0xc0 || marker == 0xc1) {  // SOF0/1 baseline
      const int prec = u8();
      if (prec != 8) throw FormatError("jpeg: only 8-bit precision supported");
      height = u16();
      width = u16();
      const int nc = u8();
      if (nc != 1 && nc != 3) throw FormatError("jpeg: unsupported component count");
      comps.resize(nc);
      for (int c = 0; c < nc; ++c) {
        comps[c].id = u8();
        const uint8_t hv = u8();
        comps[c].hs = hv >> 4;
        comps[c].vs = hv & 0x0f;
        comps[c].quant_id = u8();
        if (comps[c].hs < 1 || comps[c].hs > 2 || comps[c].vs < 1 ||
            comps[c].vs > 2)
          throw FormatError("jpeg: unsupported sampling factor");
        hmax = std::max(hmax, comps[c].hs);
        vmax = std::max(vmax, comps[c].vs);
      }
      sof_seen = true;
    } else if (marker == 0xc2) {
      throw FormatError("jpeg: progressive streams not supported");
    } else if (marker == 0xdd) {  // DRI
      restart_interval = u16();
    } else if (marker == 0xda) {  // SOS
      if (!sof_seen) throw FormatError("jpeg: SOS before SOF");
      const int ns = u8();
      if (ns != static_cast<int>(comps.size()))
        throw FormatError("jpeg: partial scans not supported");
      for (int s = 0; s < ns; ++s) {
        const int cid = u8();
        const uint8_t tables = u8();
        bool found = false;
        for (auto& c : comps)
          if (c.id == cid) {
            c.dc_table = tables >> 4;
            c.ac_table = tables & 0x0f;
            found = true;
          }
        if (!found) throw FormatError("jpeg: scan references unknown component");
      }
      u8();  // Ss
      u8();  // Se
      u8();  // Ah/Al
      pos = seg_end;
      break;  // entropy-coded data follows
    } else {
      pos = seg_end;  // skip APPn/COM/etc.
    }
  }

  const int mcux = (width + 8 * hmax - 1) / (8 * hmax);
  const int mcuy = (height + 8 * vmax - 1) / (8 * vmax);
  for (auto& c : comps) {
    c.blocks_w = mcux * c.hs;
    c.blocks_h = mcuy * c.vs;
    c.plane.assign(static_cast<size_t>(c.blocks_h) * 8 * c.blocks_w * 8, 0.0);
    if (!quant_present[c.quant_id])
      throw FormatError("jpeg: missing quant table");
  }

  BitReader br(bytes, pos);
  double coeffs[64], pixels[64];
  int mcu_count = 0, rst_index = 0;
  for (int my = 0; my < mcuy; ++my) {
    for (int mx = 0; mx < mcux; ++mx) {
      if (restart_interval && mcu_count == restart_interval) {
        br.align_and_expect_rst(rst_index);
        rst_index = (rst_index + 1) & 7;
        mcu_count = 0;
        for (auto& c : comps) c.dc_pred = 0;
      }
      for (auto& c : comps) {
        const HuffTable& dct = dc_tables[c.dc_table];
        const HuffTable& act = ac_tables[c.ac_table];
        if (!dct.present || !act.present)
          throw FormatError("jpeg: missing huffman table");
        const uint16_t* q = quant[c.quant_id];
        for (int by = 0; by < c.vs; ++by)
          for (int bx = 0; bx < c.hs; ++bx) {
            std::fill(coeffs, coeffs + 64, 0.0);
            const int dlen = decode_huff(br, dct);
            int diff = dlen ? extend(br.receive(dlen), dlen) : 0;
            c.dc_pred += diff;
            coeffs[0] = static_cast<double>(c.dc_pred) * q[0];
            for (int k = 1; k < 64;) {
              const int sym = decode_huff(br, act);
              if (sym == 0x00) break;  // EOB
              const int run = sym >> 4, size = sym & 0x0f;
              if (size == 0) {
                if (run != 15) throw FormatError("jpeg: bad AC symbol");
                k += 16;
                continue;
              }
              k += run;
              if (k > 63) throw FormatError("jpeg: AC run past block end");
              coeffs[kZigzag[k]] = static_cast<double>(
                                       extend(br.receive(size), size)) *
                                   q[k];
              ++k;
            }
            idct8x8(coeffs, pixels);
            const int px = (mx * c.hs + bx) * 8, py = (my * c.vs + by) * 8;
            const int pw = c.blocks_w * 8;
            for (int y = 0; y < 8; ++y)
              for (int x = 0; x < 8; ++x)
                c.plane[static_cast<size_t>(py + y) * pw + px + x] =
                    pixels[y * 8 + x] + 128.0;
          }
      }
      ++mcu_count;
    }
  }

  ImageBuffer out(height, width, comps.size() == 1 ? 1 : 3);
  if (comps.size() == 1) {
    const int pw = comps[0].blocks_w * 8;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        out.at(y, x, 0) = std::clamp(
            comps[0].plane[static_cast<size_t>(y) * pw + x] / 255.0, 0.0, 1.0);
    return out;
  }

  // Chroma upsampling by sample replication.
  auto sample = [&](const Component& c, int y, int x) {
    const int sy = std::min(y * c.vs / vmax, c.blocks_h * 8 - 1);
    const int sx = std::min(x * c.hs / hmax, c.blocks_w * 8 - 1);
    return c.plane[static_cast<size_t>(sy) * c.blocks_w * 8 + sx];
  };
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double Y = sample(comps[0], y, x);
      const double cb = sample(comps[1], y, x) - 128.0;
      const double cr = sample(comps[2], y, x) - 128.0;
      out.at(y, x, 0) = std::clamp((Y + 1.402 * cr) / 255.0, 0.0, 1.0);
      out.at(y, x, 1) =
          std::clamp((Y - 0.344136 * cb - 0.714136 * cr) / 255.0, 0.0, 1.0);
      out.at(y, x, 2) = std::clamp((Y + 1.772 * cb) / 255.0, 0.0, 1.0);
    }
  return out;
}

ImageBuffer jpeg_roundtrip(const ImageBuffer& rgb, int quality) {
  if (quality < 1 || quality > 100)
    throw ConfigError("jpeg: quality must be in 1..100");
  if (rgb.channels != 3)
    throw ConfigError("jpeg roundtrip expects a 3-channel image");
  ImageBuffer out = decode_jpeg(encode_jpeg(rgb, quality));
  if (out.height != rgb.height || out.width != rgb.width)
    throw FormatError("jpeg roundtrip changed image shape");
  return out;
}

}  // namespace disprobe
