#pragma once

#include <optional>
#include <string>

#include "doctest.h"
#include "prmix/error.hpp"

#define CHECK_ERROR_CODE(expr, expected)                                       \
    do {                                                                       \
        std::optional<prmix::ErrorCode> got_;                                  \
        try {                                                                  \
            (void)(expr);                                                      \
        } catch (const prmix::Error& e_) {                                     \
            got_ = e_.code();                                                  \
        }                                                                      \
        REQUIRE_MESSAGE(got_.has_value(), #expr " did not throw prmix::Error"); \
        CHECK(std::string(prmix::to_string(*got_)) ==                          \
              std::string(prmix::to_string(expected)));                        \
    } while (0)
