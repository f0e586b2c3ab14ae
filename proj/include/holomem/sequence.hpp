#pragma once

#include "holomem/sequence/ast.hpp"
#include "holomem/sequence/compiler.hpp"
#include "holomem/sequence/parser.hpp"
#include "holomem/sequence/printer.hpp"
#include "holomem/sequence/units.hpp"
