// Global allocation with cache-line alignment for anything vector-sized.
//
// Eigen peels unaligned leading elements before its vectorized reductions, so
// the summation order of a reduction over heap data depends on where malloc
// happened to place the buffer. Aligning every buffer of 64 bytes or more
// makes results independent of heap history, which is what keeps a resumed
// run and a second run in the same process bit-identical to the first.

#include <cstdlib>
#include <new>

namespace {

constexpr std::size_t kAlignment = 64;

void* allocate(std::size_t size) noexcept {
    if (size < kAlignment) return std::malloc(size == 0 ? 1 : size);
    return std::aligned_alloc(kAlignment, (size + kAlignment - 1) / kAlignment * kAlignment);
}

void* allocate_or_throw(std::size_t size) {
    void* p = allocate(size);
    while (!p) {
        auto handler = std::get_new_handler();
        if (!handler) throw std::bad_alloc();
        handler();
        p = allocate(size);
    }
    return p;
}

}  // namespace

void* operator new(std::size_t size) { return allocate_or_throw(size); }
void* operator new[](std::size_t size) { return allocate_or_throw(size); }
void* operator new(std::size_t size, const std::nothrow_t&) noexcept { return allocate(size); }
void* operator new[](std::size_t size, const std::nothrow_t&) noexcept { return allocate(size); }
void operator delete(void* p) noexcept { std::free(p); }
void operator delete[](void* p) noexcept { std::free(p); }
void operator delete(void* p, std::size_t) noexcept { std::free(p); }
void operator delete[](void* p, std::size_t) noexcept { std::free(p); }
void operator delete(void* p, const std::nothrow_t&) noexcept { std::free(p); }
void operator delete[](void* p, const std::nothrow_t&) noexcept { std::free(p); }
