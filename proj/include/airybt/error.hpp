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

#include <stdexcept>
#include <string>

namespace airybt
{
    // Every failure raised by the library derives from airybt::error so callers
    // can catch broadly, while tests can pin the exact category.
    class error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    class geometry_error : public error { using error::error; };
    class sampling_error : public error { using error::error; };
    class parameter_error : public error { using error::error; };
    class unsupported_oracle_error : public error { using error::error; };
    class input_error : public error { using error::error; };
    class size_error : public error { using error::error; };
    class config_error : public error { using error::error; };
    class usage_error : public error { using error::error; };

    // File format failures. The subclasses let readers distinguish a foreign
    // file from a damaged one.
    class format_error : public error { using error::error; };
    class magic_error : public format_error { using format_error::format_error; };
    class version_error : public format_error { using format_error::format_error; };
    class truncation_error : public format_error { using format_error::format_error; };
    class shape_error : public format_error { using format_error::format_error; };
    class non_finite_error : public format_error { using format_error::format_error; };
    class range_error : public format_error { using format_error::format_error; };

    // Architecture descriptor does not fit the codebook it is used with.
    class weights_error : public error { using error::error; };
}
