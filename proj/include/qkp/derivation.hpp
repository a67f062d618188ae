#pragma once

#include "qkp/derivation/derive.hpp"
#include "qkp/derivation/expr.hpp"
#include "qkp/derivation/parse.hpp"
