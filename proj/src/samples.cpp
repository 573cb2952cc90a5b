#include "risp/samples.hpp"

#include <stdexcept>

#include "risp/asmkit.hpp"

namespace risp::samples {
namespace {

constexpr const char* kFib = R"(
        addi x1, x0, 0          # fib(i)
        addi x2, x0, 1          # fib(i+1)
        lui  x3, 0x2            # signature cursor
        addi x4, x0, 8
        addi x7, x0, 0
loop:
        sw   x1, 0(x3)
        add  x8, x1, x2
        add  x1, x2, x0
        add  x2, x8, x0
        addi x3, x3, 4
        addi x7, x7, 1
        blt  x7, x4, loop
        jal  x0, 0
)";

constexpr const char* kBubbleSort = R"(
        lui  x1, 0x1            # array base
        addi x2, x0, 8          # element count
outer:
        addi x3, x0, 0          # index
        addi x4, x0, 0          # swapped flag
inner:
        addi x7, x2, -1
        bge  x3, x7, swept
        slli x8, x3, 2
        add  x8, x8, x1
        lw   x9, 0(x8)
        lw   x10, 4(x8)
        bge  x10, x9, ordered
        sw   x10, 0(x8)
        sw   x9, 4(x8)
        addi x4, x0, 1
ordered:
        addi x3, x3, 1
        jal  x0, inner
swept:
        bne  x4, x0, outer
        addi x3, x0, 0          # copy result to signature
        lui  x11, 0x2
copy:
        slli x8, x3, 2
        add  x9, x8, x1
        lw   x10, 0(x9)
        add  x9, x8, x11
        sw   x10, 0(x9)
        addi x3, x3, 1
        addi x7, x0, 8
        blt  x3, x7, copy
        jal  x0, 0

        .org 0x1000
        .word 42, 7, 98, 4, 1000, 0, 13, 0xFFFFFFF1
)";

constexpr const char* kCrc32 = R"(
        lui  x1, 0x1            # message base
        addi x2, x0, 4          # word count
        addi x3, x0, 0
        addi x4, x0, -1         # running crc
        lui  x7, 0xEDB88        # reflected polynomial
        addi x7, x7, 0x320
        lui  x12, 0x2
next_word:
        slli x8, x3, 2
        add  x8, x8, x1
        lw   x9, 0(x8)
        xor  x4, x4, x9
        addi x10, x0, 32
next_bit:
        andi x11, x4, 1
        srli x4, x4, 1
        beq  x11, x0, shifted
        xor  x4, x4, x7
shifted:
        addi x10, x10, -1
        bne  x10, x0, next_bit
        slli x8, x3, 2          # log intermediate state
        add  x8, x8, x12
        sw   x4, 4(x8)
        addi x3, x3, 1
        blt  x3, x2, next_word
        xori x4, x4, -1
        sw   x4, 0(x12)
        jal  x0, 0

        .org 0x1000
        .word 0x00000000, 0x12345678, 0xDEADBEEF, 0xCAFEBABE
)";

constexpr const char* kMemcpyW = R"(
        lui  x1, 0x1            # source
        lui  x2, 0x2            # destination
        addi x3, x0, 6          # word count
        jal  x4, copy
        jal  x0, 0
copy:
        addi x7, x0, 0
next:
        slli x8, x7, 2
        add  x9, x8, x1
        lw   x10, 0(x9)
        add  x9, x8, x2
        sw   x10, 0(x9)
        addi x7, x7, 1
        blt  x7, x3, next
        jalr x0, 0(x4)

        .org 0x1000
        .word 0x00000011, 0x00000022, 0x00000031, 0x00000044, 0x00000055, 0x00000066
)";

constexpr const char* kDtree = R"(
        lui  x1, 0x1            # feature vector
        lui  x2, 0x2            # class output
        addi x3, x0, 0
sample:
        slli x8, x3, 2
        add  x9, x8, x1
        lw   x10, 0(x9)
        addi x11, x0, 50
        blt  x10, x11, low
        addi x12, x0, 100
        blt  x10, x12, mid
        addi x13, x0, 3
        jal  x0, classified
mid:
        addi x13, x0, 2
        jal  x0, classified
low:
        bge  x10, x0, small
        addi x13, x0, 0
        jal  x0, classified
small:
        addi x13, x0, 1
classified:
        add  x9, x8, x2
        sw   x13, 0(x9)
        addi x3, x3, 1
        addi x14, x0, 6
        blt  x3, x14, sample
        jal  x0, 0

        .org 0x1000
        .word 10, 75, 200, 0xFFFFFFD6, 49, 150
)";

constexpr const char* kBitops = R"(
        lui   x1, 0x2
        addi  x2, x0, -7
        addi  x3, x0, 3
        sub   x4, x2, x3
        sw    x4, 0(x1)
        or    x7, x2, x3
        sw    x7, 4(x1)
        and   x8, x2, x3
        sw    x8, 8(x1)
        xor   x9, x2, x3
        sw    x9, 12(x1)
        slt   x10, x2, x3
        sw    x10, 16(x1)
        sltu  x11, x2, x3
        sw    x11, 20(x1)
        sra   x12, x2, x3
        sw    x12, 24(x1)
        srl   x13, x2, x3
        sw    x13, 28(x1)
        sll   x14, x3, x8
        sw    x14, 32(x1)
        slti  x7, x2, -6
        sw    x7, 36(x1)
        sltiu x8, x2, -6
        sw    x8, 40(x1)
        ori   x9, x3, 12
        sw    x9, 44(x1)
        andi  x10, x2, 15
        sw    x10, 48(x1)
        srai  x11, x2, 1
        sw    x11, 52(x1)
        srli  x12, x2, 28
        sw    x12, 56(x1)
        slli  x13, x3, 4
        sw    x13, 60(x1)
        auipc x14, 0
        sltiu x14, x14, 1
        sw    x14, 64(x1)
        bltu  x3, x2, uns
        addi  x15, x0, 0
        jal   x0, store_flag
uns:
        addi  x15, x0, 1
store_flag:
        sw    x15, 68(x1)
        bgeu  x2, x3, uns2
        addi  x15, x0, 0
        jal   x0, store_flag2
uns2:
        addi  x15, x0, 2
store_flag2:
        sw    x15, 72(x1)
        beq   x2, x2, same
        addi  x15, x0, 0
        jal   x0, store_eq
same:
        addi  x15, x0, 7
store_eq:
        sw    x15, 76(x1)
        jal   x0, 0
)";

Sample make_sample(const char* name, const char* source, uint32_t sig_lo, uint32_t sig_hi) {
  Sample s;
  s.name = name;
  s.source = source;
  s.image = asmkit::to_image(asmkit::assemble(source, 0), name);
  s.signature_region = {sig_lo, sig_hi};
  return s;
}

std::vector<Sample> build_all() {
  std::vector<Sample> v;
  v.push_back(make_sample("fib", kFib, 0x2000, 0x2020));
  v.push_back(make_sample("bubble_sort", kBubbleSort, 0x2000, 0x2020));
  v.push_back(make_sample("crc32", kCrc32, 0x2000, 0x2014));
  v.push_back(make_sample("memcpy_w", kMemcpyW, 0x2000, 0x2018));
  v.push_back(make_sample("dtree", kDtree, 0x2000, 0x2018));
  v.push_back(make_sample("bitops", kBitops, 0x2000, 0x2050));
  return v;
}

}  // namespace

const std::vector<Sample>& all() {
  static const std::vector<Sample> samples = build_all();
  return samples;
}

const Sample& get(std::string_view name) {
  for (const Sample& s : all()) {
    if (s.name == name) return s;
  }
  throw std::out_of_range("no sample named " + std::string(name));
}

}  // namespace risp::samples
