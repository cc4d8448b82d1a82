// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0
//
// Torch's logging header defines a fatal CHECK macro. Including it before
// doctest lets doctest's reporting CHECK take precedence.

#pragma once

#include <torch/torch.h>

#include <doctest.h>
