#include "avianrisk/hexgrid.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <stdexcept>

// The geometry follows the reference H3 forward-indexing pipeline:
// geodetic point -> unit 3-vector -> closest icosahedron face -> gnomonic
// planar hex coordinates -> integer IJK -> index digits plus base cell.
// Tables (face centers, face axis azimuths, base-cell lookup, pentagon data)
// are transcribed from a conformant implementation of the H3 specification;
// tests/data/h3_cells.json pins the behavior to the reference library.

namespace avianrisk::hexgrid {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Gnomonic scale: hex2d resolution-0 unit length expressed in gnomonic units.
constexpr double kRes0UGnomonic = 0.381966011250105;
constexpr double kInvRes0UGnomonic = 2.618033988749896;

// Rotation between class II and class III resolution axes: asin(sqrt(3/28)).
constexpr double kAp7RotRads = 0.3334731722518321;

constexpr double kEpsilon = 1e-16;

constexpr double kSqrt7Powers[16] = {
    1.0,
    2.6457513110645907,
    7.0,
    18.520259177452136,
    49.00000000000001,
    129.64181424216497,
    343.0000000000001,
    907.4926996951549,
    2401.000000000001,
    6352.448897866085,
    16807.000000000007,
    44467.1422850626,
    117649.00000000007,
    311269.9959954382,
    823543.0000000006,
    2178889.971968068,
};

struct Vec3 {
  double x, y, z;
};

// Icosahedron face centers as unit 3-vectors.
constexpr Vec3 kFaceCenter[20] = {
    {0.2199307791404606, 0.6583691780274996, 0.7198475378926182},
    {-0.2139234834501421, 0.1478171829550703, 0.9656017935214205},
    {0.1092625278784797, -0.481195157287321, 0.8697775121287253},
    {0.7428567301586791, -0.3593941678278028, 0.5648005936517033},
    {0.8112534709140969, 0.3448953237639384, 0.472138773641393},
    {-0.1055498149613921, 0.9794457296411413, 0.1718874610009365},
    {-0.8075407579970092, 0.1533552485898818, 0.5695261994882688},
    {-0.2846148069787907, -0.8644080972654206, 0.4144792552473539},
    {0.7405621473854482, -0.6673299564565524, -0.0789837646326737},
    {0.8512303986474293, 0.4722343788582681, -0.2289137388687808},
    {-0.7405621473854481, 0.6673299564565524, 0.0789837646326737},
    {-0.8512303986474292, -0.4722343788582682, 0.2289137388687808},
    {0.1055498149613919, -0.9794457296411413, -0.1718874610009365},
    {0.8075407579970092, -0.1533552485898819, -0.5695261994882688},
    {0.2846148069787908, 0.8644080972654204, -0.4144792552473539},
    {-0.7428567301586791, 0.3593941678278027, -0.5648005936517033},
    {-0.811253470914097, -0.3448953237639382, -0.472138773641393},
    {-0.2199307791404607, -0.6583691780274996, -0.7198475378926182},
    {0.213923483450142, -0.1478171829550704, -0.9656017935214205},
    {-0.1092625278784796, 0.481195157287321, -0.8697775121287253},
};

// Azimuth (radians) from each face center to its vertex 0; defines the
// class II i-axis orientation on that face.
constexpr double kFaceAxesAzCII[20] = {
    5.6199582685239395, 5.7603390817141875, 0.78021365439343,    0.4304693639799999,
    6.130269123335111,  2.692877706530643,  2.982963003477244,   3.532912002790141,
    3.494305004259568,  3.0032141694995382, 5.930472956509812,   0.13837848409025486,
    0.4487149470591504, 0.15862965011254937, 5.891865957979238,  2.711123289609793,
    3.294508837434268,  3.80481969224544,   3.6644388790551923,  2.361378999196363,
};

struct BaseCellRotation {
  std::uint8_t cell;    // base cell number
  std::uint8_t ccw_rot; // 60-degree ccw rotations into its coordinate system
};

// Resolution-0 base cell per (face, i, j, k) with i,j,k in [0, 2].
constexpr BaseCellRotation kFaceIjkBaseCells[20][3][3][3] = {
    {{{{16, 0}, {18, 0}, {24, 0}}, {{33, 0}, {30, 0}, {32, 3}}, {{49, 1}, {48, 3}, {50, 3}}},
     {{{8, 0}, {5, 5}, {10, 5}}, {{22, 0}, {16, 0}, {18, 0}}, {{41, 1}, {33, 0}, {30, 0}}},
     {{{4, 0}, {0, 5}, {2, 5}}, {{15, 1}, {8, 0}, {5, 5}}, {{31, 1}, {22, 0}, {16, 0}}}},
    {{{{2, 0}, {6, 0}, {14, 0}}, {{10, 0}, {11, 0}, {17, 3}}, {{24, 1}, {23, 3}, {25, 3}}},
     {{{0, 0}, {1, 5}, {9, 5}}, {{5, 0}, {2, 0}, {6, 0}}, {{18, 1}, {10, 0}, {11, 0}}},
     {{{4, 1}, {3, 5}, {7, 5}}, {{8, 1}, {0, 0}, {1, 5}}, {{16, 1}, {5, 0}, {2, 0}}}},
    {{{{7, 0}, {21, 0}, {38, 0}}, {{9, 0}, {19, 0}, {34, 3}}, {{14, 1}, {20, 3}, {36, 3}}},
     {{{3, 0}, {13, 5}, {29, 5}}, {{1, 0}, {7, 0}, {21, 0}}, {{6, 1}, {9, 0}, {19, 0}}},
     {{{4, 2}, {12, 5}, {26, 5}}, {{0, 1}, {3, 0}, {13, 5}}, {{2, 1}, {1, 0}, {7, 0}}}},
    {{{{26, 0}, {42, 0}, {58, 0}}, {{29, 0}, {43, 0}, {62, 3}}, {{38, 1}, {47, 3}, {64, 3}}},
     {{{12, 0}, {28, 5}, {44, 5}}, {{13, 0}, {26, 0}, {42, 0}}, {{21, 1}, {29, 0}, {43, 0}}},
     {{{4, 3}, {15, 5}, {31, 5}}, {{3, 1}, {12, 0}, {28, 5}}, {{7, 1}, {13, 0}, {26, 0}}}},
    {{{{31, 0}, {41, 0}, {49, 0}}, {{44, 0}, {53, 0}, {61, 3}}, {{58, 1}, {65, 3}, {75, 3}}},
     {{{15, 0}, {22, 5}, {33, 5}}, {{28, 0}, {31, 0}, {41, 0}}, {{42, 1}, {44, 0}, {53, 0}}},
     {{{4, 4}, {8, 5}, {16, 5}}, {{12, 1}, {15, 0}, {22, 5}}, {{26, 1}, {28, 0}, {31, 0}}}},
    {{{{50, 0}, {48, 0}, {49, 3}}, {{32, 0}, {30, 3}, {33, 3}}, {{24, 3}, {18, 3}, {16, 3}}},
     {{{70, 0}, {67, 0}, {66, 3}}, {{52, 3}, {50, 0}, {48, 0}}, {{37, 3}, {32, 0}, {30, 3}}},
     {{{83, 0}, {87, 3}, {85, 3}}, {{74, 3}, {70, 0}, {67, 0}}, {{57, 1}, {52, 3}, {50, 0}}}},
    {{{{25, 0}, {23, 0}, {24, 3}}, {{17, 0}, {11, 3}, {10, 3}}, {{14, 3}, {6, 3}, {2, 3}}},
     {{{45, 0}, {39, 0}, {37, 3}}, {{35, 3}, {25, 0}, {23, 0}}, {{27, 3}, {17, 0}, {11, 3}}},
     {{{63, 0}, {59, 3}, {57, 3}}, {{56, 3}, {45, 0}, {39, 0}}, {{46, 3}, {35, 3}, {25, 0}}}},
    {{{{36, 0}, {20, 0}, {14, 3}}, {{34, 0}, {19, 3}, {9, 3}}, {{38, 3}, {21, 3}, {7, 3}}},
     {{{55, 0}, {40, 0}, {27, 3}}, {{54, 3}, {36, 0}, {20, 0}}, {{51, 3}, {34, 0}, {19, 3}}},
     {{{72, 0}, {60, 3}, {46, 3}}, {{73, 3}, {55, 0}, {40, 0}}, {{71, 3}, {54, 3}, {36, 0}}}},
    {{{{64, 0}, {47, 0}, {38, 3}}, {{62, 0}, {43, 3}, {29, 3}}, {{58, 3}, {42, 3}, {26, 3}}},
     {{{84, 0}, {69, 0}, {51, 3}}, {{82, 3}, {64, 0}, {47, 0}}, {{76, 3}, {62, 0}, {43, 3}}},
     {{{97, 0}, {89, 3}, {71, 3}}, {{98, 3}, {84, 0}, {69, 0}}, {{96, 3}, {82, 3}, {64, 0}}}},
    {{{{75, 0}, {65, 0}, {58, 3}}, {{61, 0}, {53, 3}, {44, 3}}, {{49, 3}, {41, 3}, {31, 3}}},
     {{{94, 0}, {86, 0}, {76, 3}}, {{81, 3}, {75, 0}, {65, 0}}, {{66, 3}, {61, 0}, {53, 3}}},
     {{{107, 0}, {104, 3}, {96, 3}}, {{101, 3}, {94, 0}, {86, 0}}, {{85, 3}, {81, 3}, {75, 0}}}},
    {{{{57, 0}, {59, 0}, {63, 3}}, {{74, 0}, {78, 3}, {79, 3}}, {{83, 3}, {92, 3}, {95, 3}}},
     {{{37, 0}, {39, 3}, {45, 3}}, {{52, 0}, {57, 0}, {59, 0}}, {{70, 3}, {74, 0}, {78, 3}}},
     {{{24, 0}, {23, 3}, {25, 3}}, {{32, 3}, {37, 0}, {39, 3}}, {{50, 3}, {52, 0}, {57, 0}}}},
    {{{{46, 0}, {60, 0}, {72, 3}}, {{56, 0}, {68, 3}, {80, 3}}, {{63, 3}, {77, 3}, {90, 3}}},
     {{{27, 0}, {40, 3}, {55, 3}}, {{35, 0}, {46, 0}, {60, 0}}, {{45, 3}, {56, 0}, {68, 3}}},
     {{{14, 0}, {20, 3}, {36, 3}}, {{17, 3}, {27, 0}, {40, 3}}, {{25, 3}, {35, 0}, {46, 0}}}},
    {{{{71, 0}, {89, 0}, {97, 3}}, {{73, 0}, {91, 3}, {103, 3}}, {{72, 3}, {88, 3}, {105, 3}}},
     {{{51, 0}, {69, 3}, {84, 3}}, {{54, 0}, {71, 0}, {89, 0}}, {{55, 3}, {73, 0}, {91, 3}}},
     {{{38, 0}, {47, 3}, {64, 3}}, {{34, 3}, {51, 0}, {69, 3}}, {{36, 3}, {54, 0}, {71, 0}}}},
    {{{{96, 0}, {104, 0}, {107, 3}}, {{98, 0}, {110, 3}, {115, 3}}, {{97, 3}, {111, 3}, {119, 3}}},
     {{{76, 0}, {86, 3}, {94, 3}}, {{82, 0}, {96, 0}, {104, 0}}, {{84, 3}, {98, 0}, {110, 3}}},
     {{{58, 0}, {65, 3}, {75, 3}}, {{62, 3}, {76, 0}, {86, 3}}, {{64, 3}, {82, 0}, {96, 0}}}},
    {{{{85, 0}, {87, 0}, {83, 3}}, {{101, 0}, {102, 3}, {100, 3}}, {{107, 3}, {112, 3}, {114, 3}}},
     {{{66, 0}, {67, 3}, {70, 3}}, {{81, 0}, {85, 0}, {87, 0}}, {{94, 3}, {101, 0}, {102, 3}}},
     {{{49, 0}, {48, 3}, {50, 3}}, {{61, 3}, {66, 0}, {67, 3}}, {{75, 3}, {81, 0}, {85, 0}}}},
    {{{{95, 0}, {92, 0}, {83, 0}}, {{79, 0}, {78, 0}, {74, 3}}, {{63, 1}, {59, 3}, {57, 3}}},
     {{{109, 0}, {108, 0}, {100, 5}}, {{93, 1}, {95, 0}, {92, 0}}, {{77, 1}, {79, 0}, {78, 0}}},
     {{{117, 4}, {118, 5}, {114, 5}}, {{106, 1}, {109, 0}, {108, 0}}, {{90, 1}, {93, 1}, {95, 0}}}},
    {{{{90, 0}, {77, 0}, {63, 0}}, {{80, 0}, {68, 0}, {56, 3}}, {{72, 1}, {60, 3}, {46, 3}}},
     {{{106, 0}, {93, 0}, {79, 5}}, {{99, 1}, {90, 0}, {77, 0}}, {{88, 1}, {80, 0}, {68, 0}}},
     {{{117, 3}, {109, 5}, {95, 5}}, {{113, 1}, {106, 0}, {93, 0}}, {{105, 1}, {99, 1}, {90, 0}}}},
    {{{{105, 0}, {88, 0}, {72, 0}}, {{103, 0}, {91, 0}, {73, 3}}, {{97, 1}, {89, 3}, {71, 3}}},
     {{{113, 0}, {99, 0}, {80, 5}}, {{116, 1}, {105, 0}, {88, 0}}, {{111, 1}, {103, 0}, {91, 0}}},
     {{{117, 2}, {106, 5}, {90, 5}}, {{121, 1}, {113, 0}, {99, 0}}, {{119, 1}, {116, 1}, {105, 0}}}},
    {{{{119, 0}, {111, 0}, {97, 0}}, {{115, 0}, {110, 0}, {98, 3}}, {{107, 1}, {104, 3}, {96, 3}}},
     {{{121, 0}, {116, 0}, {103, 5}}, {{120, 1}, {119, 0}, {111, 0}}, {{112, 1}, {115, 0}, {110, 0}}},
     {{{117, 1}, {113, 5}, {105, 5}}, {{118, 1}, {121, 0}, {116, 0}}, {{114, 1}, {120, 1}, {119, 0}}}},
    {{{{114, 0}, {112, 0}, {107, 0}}, {{100, 0}, {102, 0}, {101, 3}}, {{83, 1}, {87, 3}, {85, 3}}},
     {{{118, 0}, {120, 0}, {115, 5}}, {{108, 1}, {114, 0}, {112, 0}}, {{92, 1}, {100, 0}, {102, 0}}},
     {{{117, 0}, {121, 5}, {119, 5}}, {{109, 1}, {118, 0}, {120, 0}}, {{95, 1}, {108, 1}, {114, 0}}}},
};

// The 12 pentagonal base cells as a bitmap over cell numbers 0..121.
constexpr std::uint64_t kPentagonBitsLo = 0x8402004001004010ULL; // cells 0..63
constexpr std::uint64_t kPentagonBitsHi = 0x0020080200080100ULL; // cells 64..121

bool is_pentagon_base(int cell) {
  return cell < 64 ? (kPentagonBitsLo >> cell) & 1
                   : (kPentagonBitsHi >> (cell - 64)) & 1;
}

// For the ten non-polar pentagons, the two adjacent faces whose projections
// need a clockwise (instead of ccw) rotation out of the missing k sub-sequence.
struct PentagonCwOffset {
  std::uint8_t cell;
  std::uint8_t face1, face2;
};
constexpr PentagonCwOffset kPentagonCwOffsets[] = {
    {14, 2, 6},  {24, 1, 5},   {38, 3, 7},   {49, 0, 9},   {58, 4, 8},
    {63, 11, 15}, {72, 12, 16}, {83, 10, 19}, {97, 13, 17}, {107, 14, 18},
};

bool is_cw_offset_face(int cell, int face) {
  for (const auto& p : kPentagonCwOffsets) {
    if (p.cell == cell) return p.face1 == face || p.face2 == face;
  }
  return false;
}

// ---- index bit layout -------------------------------------------------------
// bit 63: reserved 0 | bits 59-62: mode (1 = cell) | bits 56-58: reserved 0 |
// bits 52-55: resolution | bits 45-51: base cell | 15 x 3-bit digits, digit
// for resolution r at bits (15-r)*3, unused digits set to 7.

constexpr std::uint64_t kCellModeRes0Base0 = 0x8001fffffffffffULL;
constexpr int kResOffset = 52;
constexpr int kBaseCellOffset = 45;
constexpr int kMaxRes = 15;

std::uint64_t set_resolution_bits(std::uint64_t bits, int res) {
  return (bits & ~(0xfULL << kResOffset)) |
         (static_cast<std::uint64_t>(res) << kResOffset);
}

std::uint64_t set_base_cell_bits(std::uint64_t bits, int cell) {
  return (bits & ~(0x7fULL << kBaseCellOffset)) |
         (static_cast<std::uint64_t>(cell) << kBaseCellOffset);
}

int get_base_cell_bits(std::uint64_t bits) {
  return static_cast<int>((bits >> kBaseCellOffset) & 0x7f);
}

int digit_offset(int res) { return (kMaxRes - res) * 3; }

int get_digit(std::uint64_t bits, int res) {
  return static_cast<int>((bits >> digit_offset(res)) & 0x7);
}

std::uint64_t set_digit(std::uint64_t bits, int res, int digit) {
  const int off = digit_offset(res);
  return (bits & ~(0x7ULL << off)) | (static_cast<std::uint64_t>(digit) << off);
}

// Digit values follow the (i<<2)|(j<<1)|k unit-vector encoding:
// 0 center, 1 K, 2 J, 3 JK, 4 I, 5 IK, 6 IJ.
constexpr int kDigitK = 1;
constexpr int kDigitJK = 3;

int rotate_digit_ccw(int digit) {
  static constexpr int next[7] = {0, 5, 3, 1, 6, 4, 2}; // K->IK, J->JK, JK->K, I->IJ, IK->I, IJ->J
  return next[digit];
}

int rotate_digit_cw(int digit) {
  static constexpr int next[7] = {0, 3, 6, 2, 5, 1, 4}; // K->JK, J->IJ, JK->J, I->IK, IK->K, IJ->I
  return next[digit];
}

int first_nonzero_digit(std::uint64_t bits, int res) {
  for (int r = 1; r <= res; ++r) {
    if (const int d = get_digit(bits, r)) return d;
  }
  return 0;
}

std::uint64_t rotate60_ccw(std::uint64_t bits, int res) {
  for (int r = 1; r <= res; ++r)
    bits = set_digit(bits, r, rotate_digit_ccw(get_digit(bits, r)));
  return bits;
}

std::uint64_t rotate60_cw(std::uint64_t bits, int res) {
  for (int r = 1; r <= res; ++r)
    bits = set_digit(bits, r, rotate_digit_cw(get_digit(bits, r)));
  return bits;
}

// Pentagon variant: when the leading digit would rotate onto the deleted
// k-axis, rotate twice to skip over it.
std::uint64_t pentagon_rotate60_ccw(std::uint64_t bits, int res) {
  const bool skip = first_nonzero_digit(bits, res) == kDigitJK;
  for (int r = 1; r <= res; ++r) {
    int d = rotate_digit_ccw(get_digit(bits, r));
    if (skip) d = rotate_digit_ccw(d);
    bits = set_digit(bits, r, d);
  }
  return bits;
}

// ---- planar hex coordinates -------------------------------------------------

struct CoordIJK {
  int i, j, k;
};

CoordIJK normalize(CoordIJK c) {
  const int m = std::min(c.i, std::min(c.j, c.k));
  return {c.i - m, c.j - m, c.k - m};
}

CoordIJK up_aperture7(CoordIJK c, bool ccw) {
  const int i = c.i - c.k;
  const int j = c.j - c.k;
  double ni, nj;
  if (ccw) {
    ni = (3 * i - j) / 7.0;
    nj = (i + 2 * j) / 7.0;
  } else {
    ni = (2 * i + j) / 7.0;
    nj = (3 * j - i) / 7.0;
  }
  return normalize({static_cast<int>(std::lround(ni)),
                    static_cast<int>(std::lround(nj)), 0});
}

CoordIJK down_aperture7(CoordIJK c, bool ccw) {
  // Coarser-resolution unit vectors expressed one aperture-7 level finer.
  const CoordIJK iv = ccw ? CoordIJK{3, 0, 1} : CoordIJK{3, 1, 0};
  const CoordIJK jv = ccw ? CoordIJK{1, 3, 0} : CoordIJK{0, 3, 1};
  const CoordIJK kv = ccw ? CoordIJK{0, 1, 3} : CoordIJK{1, 0, 3};
  return normalize({c.i * iv.i + c.j * jv.i + c.k * kv.i,
                    c.i * iv.j + c.j * jv.j + c.k * kv.j,
                    c.i * iv.k + c.j * jv.k + c.k * kv.k});
}

// Containing hex for planar cartesian coordinates (DGGRID quantization).
CoordIJK hex2d_to_ijk(double x, double y) {
  constexpr double kRSin60 = 1.1547005383792515; // 1/sin 60
  const double a1 = std::fabs(x);
  const double a2 = std::fabs(y);

  const double x2 = a2 * kRSin60;
  const double x1 = a1 + x2 / 2.0;

  const int m1 = static_cast<int>(x1);
  const int m2 = static_cast<int>(x2);
  const double r1 = x1 - m1;
  const double r2 = x2 - m2;

  int i, j;
  if (r1 < 0.5) {
    if (r1 < 1.0 / 3.0) {
      i = m1;
      j = m2 + (r2 >= (1.0 + r1) / 2.0 ? 1 : 0);
    } else {
      i = m1 + ((1.0 - r1) <= r2 && r2 < 2.0 * r1 ? 1 : 0);
      j = m2 + (r2 >= 1.0 - r1 ? 1 : 0);
    }
  } else if (r1 < 2.0 / 3.0) {
    j = m2 + (r2 >= 1.0 - r1 ? 1 : 0);
    i = m1 + (2.0 * r1 - 1.0 >= r2 || r2 >= 1.0 - r1 ? 1 : 0);
  } else {
    i = m1 + 1;
    j = m2 + (r2 >= r1 / 2.0 ? 1 : 0);
  }

  // Fold across the axes for negative planar coordinates.
  if (x < 0.0) {
    const int offset = j % 2;
    const int axis_i = (j + offset) / 2;
    const int diff = i - axis_i;
    i -= 2 * diff + offset;
  }
  if (y < 0.0) {
    i -= (2 * j + 1) / 2;
    j = -j;
  }
  return normalize({i, j, 0});
}

// ---- spherical geometry -----------------------------------------------------

double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

Vec3 normalized(Vec3 v) {
  const double n = std::sqrt(dot(v, v));
  if (n > 0.0) return {v.x / n, v.y / n, v.z / n};
  return {0.0, 0.0, 0.0};
}

// Azimuth from `from` to `to` along the surface, measured from north.
double azimuth(const Vec3& from, const Vec3& to) {
  // Local north/east basis on the tangent plane at `from`. Face centers are
  // never at the poles, so this basis is well defined.
  const Vec3 pole{0.0, 0.0, 1.0};
  const double pd = dot(pole, from);
  const Vec3 north = normalized({pole.x - pd * from.x, pole.y - pd * from.y,
                                 pole.z - pd * from.z});
  const Vec3 east{north.y * from.z - north.z * from.y,
                  north.z * from.x - north.x * from.z,
                  north.x * from.y - north.y * from.x};
  const double td = dot(to, from);
  const Vec3 proj = normalized({to.x - td * from.x, to.y - td * from.y,
                                to.z - td * from.z});
  return std::atan2(dot(proj, east), dot(proj, north));
}

double positive_angle(double a) {
  if (a < 0.0) a += kTwoPi;
  else if (a >= kTwoPi) a -= kTwoPi;
  return a;
}

} // namespace

std::uint64_t lat_lng_to_cell(double lat_deg, double lon_deg, int res) {
  if (res < 0 || res > kMaxRes)
    throw std::invalid_argument("hexgrid: resolution out of range [0, 15]");

  const double lat = lat_deg * std::numbers::pi / 180.0;
  const double lng = lon_deg * std::numbers::pi / 180.0;
  const double clat = std::cos(lat);
  const Vec3 v{std::cos(lng) * clat, std::sin(lng) * clat, std::sin(lat)};

  // Closest face by squared chord distance; ties resolved by lowest face.
  int face = 0;
  double sqd = 5.0;
  for (int f = 0; f < 20; ++f) {
    const Vec3 d{v.x - kFaceCenter[f].x, v.y - kFaceCenter[f].y,
                 v.z - kFaceCenter[f].z};
    const double dist = dot(d, d);
    if (dist < sqd) {
      face = f;
      sqd = dist;
    }
  }

  // Gnomonic projection onto the face plane, in hex2d units at `res`.
  double hx = 0.0, hy = 0.0;
  const double r = std::acos(1.0 - sqd / 2.0);
  if (r >= kEpsilon) {
    const double scaled = std::tan(r) * kInvRes0UGnomonic * kSqrt7Powers[res];
    double theta =
        kFaceAxesAzCII[face] -
        positive_angle(azimuth(kFaceCenter[face], v));
    if (res % 2 == 1) theta -= kAp7RotRads; // class III axes are rotated
    hx = scaled * std::cos(theta);
    hy = scaled * std::sin(theta);
  }

  CoordIJK ijk = hex2d_to_ijk(hx, hy);

  std::uint64_t bits = set_resolution_bits(kCellModeRes0Base0, res);

  // Fold the finest-resolution coordinates down to resolution 0, recording
  // one digit per level; what remains addresses the base cell on this face.
  for (int rr = res; rr >= 1; --rr) {
    const bool ccw = rr % 2 == 1;
    const CoordIJK last = ijk;
    ijk = up_aperture7(ijk, ccw);
    const CoordIJK center = down_aperture7(ijk, ccw);
    const CoordIJK diff =
        normalize({last.i - center.i, last.j - center.j, last.k - center.k});
    bits = set_digit(bits, rr, (diff.i << 2) | (diff.j << 1) | diff.k);
  }

  const BaseCellRotation bcr = kFaceIjkBaseCells[face][ijk.i][ijk.j][ijk.k];
  bits = set_base_cell_bits(bits, bcr.cell);

  if (is_pentagon_base(bcr.cell)) {
    // The k sub-sequence is deleted on pentagons; rotate out of it first.
    if (first_nonzero_digit(bits, res) == kDigitK) {
      bits = is_cw_offset_face(bcr.cell, face) ? rotate60_cw(bits, res)
                                               : rotate60_ccw(bits, res);
    }
    for (int n = 0; n < bcr.ccw_rot; ++n)
      bits = pentagon_rotate60_ccw(bits, res);
  } else {
    for (int n = 0; n < bcr.ccw_rot; ++n) bits = rotate60_ccw(bits, res);
  }
  return bits;
}

std::uint64_t cell_to_parent(std::uint64_t cell, int parent_res) {
  const int res = cell_resolution(cell);
  if (parent_res < 0 || parent_res > res)
    throw std::invalid_argument("hexgrid: parent resolution out of range");
  std::uint64_t bits = set_resolution_bits(cell, parent_res);
  for (int r = parent_res + 1; r <= res; ++r) bits = set_digit(bits, r, 7);
  return bits;
}

int cell_resolution(std::uint64_t cell) noexcept {
  return static_cast<int>((cell >> kResOffset) & 0xf);
}

bool is_valid_cell(std::uint64_t cell) noexcept {
  if (cell >> 63) return false;
  if (((cell >> 59) & 0xf) != 1) return false; // cell mode
  if ((cell >> 56) & 0x7) return false;        // reserved bits
  const int base = get_base_cell_bits(cell);
  if (base > 121) return false;
  const int res = cell_resolution(cell);
  bool seen_nonzero = false;
  for (int r = 1; r <= res; ++r) {
    const int d = get_digit(cell, r);
    if (d == 7) return false;
    if (!seen_nonzero && d != 0) {
      seen_nonzero = true;
      // Pentagons delete the k sub-sequence entirely.
      if (d == kDigitK && is_pentagon_base(base)) return false;
    }
  }
  for (int r = res + 1; r <= kMaxRes; ++r)
    if (get_digit(cell, r) != 7) return false;
  return true;
}

std::string cell_to_string(std::uint64_t cell) {
  char buf[17];
  const int n = std::snprintf(buf, sizeof buf, "%llx",
                              static_cast<unsigned long long>(cell));
  return std::string(buf, static_cast<std::size_t>(n));
}

std::uint64_t cell_from_string(std::string_view s) noexcept {
  if (s.empty() || s.size() > 16) return kInvalidCell;
  std::uint64_t value = 0;
  for (const char c : s) {
    int digit;
    if (c >= '0' && c <= '9') digit = c - '0';
    else if (c >= 'a' && c <= 'f') digit = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') digit = c - 'A' + 10;
    else return kInvalidCell;
    value = (value << 4) | static_cast<std::uint64_t>(digit);
  }
  return value;
}

} // namespace avianrisk::hexgrid
