#pragma once

namespace mdlab {

// Fixed special token ids, shared by the tokenizer, masking and trainer.
// Never produced by merges, never maskable.
inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kClsId = 2;
inline constexpr int kSepId = 3;
inline constexpr int kMaskId = 4;
inline constexpr int kNumSpecialTokens = 5;

inline constexpr bool is_special_token(int id) { return id >= 0 && id < kNumSpecialTokens; }

}  // namespace mdlab
