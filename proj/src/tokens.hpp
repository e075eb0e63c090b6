#pragma once

namespace tslstm {

// Reserved vocabulary indices.
inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kUnk = 3;
inline constexpr int kNumReserved = 4;

}  // namespace tslstm
