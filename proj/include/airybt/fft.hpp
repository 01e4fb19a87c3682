// SPDX-License-Identifier: Apache-2.0
//
// airybt: near-field Airy beam training laboratory
// Copyright (C) 2026 The airybt authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>

#include <fftw3.h>

namespace airybt
{
    using cplx = std::complex<double>;

    namespace detail
    {
        struct fftw_deleter
        {
            void operator()(cplx *p) const { fftw_free(p); }
        };

        // FFTW's planner is not re-entrant; execution is.
        inline std::mutex &fftw_planner_mutex()
        {
            static std::mutex m;
            return m;
        }

        inline fftw_complex *as_fftw(cplx *p) { return reinterpret_cast<fftw_complex *>(p); }
    }

    // SIMD-aligned complex scratch buffer. All buffers come from fftw_malloc so
    // every execution of a shared plan sees the same alignment, which keeps
    // results bit-identical between threads.
    class fft_buffer
    {
    public:
        explicit fft_buffer(std::size_t n = 0)
            : data_(n ? static_cast<cplx *>(fftw_malloc(sizeof(cplx) * n)) : nullptr), size_(n)
        {
            if (n && !data_)
                throw std::bad_alloc();
            for (std::size_t i = 0; i < n; ++i)
                data_.get()[i] = 0.0;
        }

        cplx *data() { return data_.get(); }
        const cplx *data() const { return data_.get(); }
        std::size_t size() const { return size_; }
        cplx &operator[](std::size_t i) { return data_.get()[i]; }
        const cplx &operator[](std::size_t i) const { return data_.get()[i]; }
        std::span<cplx> span() { return {data_.get(), size_}; }
        std::span<const cplx> span() const { return {data_.get(), size_}; }

    private:
        std::unique_ptr<cplx[], detail::fftw_deleter> data_;
        std::size_t size_;
    };

    // In-place forward/inverse DFT pair of fixed length. The inverse is
    // unnormalized, matching FFTW.
    class fft_plan
    {
    public:
        explicit fft_plan(std::size_t n) : n_(n)
        {
            fft_buffer scratch(n);
            std::lock_guard lock(detail::fftw_planner_mutex());
            const int len = static_cast<int>(n);
            forward_ = fftw_plan_dft_1d(len, detail::as_fftw(scratch.data()), detail::as_fftw(scratch.data()), FFTW_FORWARD, FFTW_ESTIMATE);
            inverse_ = fftw_plan_dft_1d(len, detail::as_fftw(scratch.data()), detail::as_fftw(scratch.data()), FFTW_BACKWARD, FFTW_ESTIMATE);
        }
        ~fft_plan()
        {
            std::lock_guard lock(detail::fftw_planner_mutex());
            if (forward_)
                fftw_destroy_plan(forward_);
            if (inverse_)
                fftw_destroy_plan(inverse_);
        }
        fft_plan(const fft_plan &) = delete;
        fft_plan &operator=(const fft_plan &) = delete;

        std::size_t size() const { return n_; }

        void forward(fft_buffer &buf) const { fftw_execute_dft(forward_, detail::as_fftw(buf.data()), detail::as_fftw(buf.data())); }
        void inverse(fft_buffer &buf) const { fftw_execute_dft(inverse_, detail::as_fftw(buf.data()), detail::as_fftw(buf.data())); }

    private:
        std::size_t n_;
        fftw_plan forward_ = nullptr;
        fftw_plan inverse_ = nullptr;
    };

    inline std::size_t next_pow2(std::size_t n)
    {
        std::size_t p = 1;
        while (p < n)
            p <<= 1;
        return p;
    }
}
