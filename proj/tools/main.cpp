// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "shopstage/cli.hpp"

int main(int argc, char** argv) { return shopstage::dispatch(argc, argv, std::cout, std::cerr); }
