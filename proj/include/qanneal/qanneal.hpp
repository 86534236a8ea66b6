/*
   Copyright 2026 The qanneal Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/
#pragma once

#include "qanneal/error.hpp"
#include "qanneal/exact_dynamics.hpp"
#include "qanneal/harness.hpp"
#include "qanneal/ising.hpp"
#include "qanneal/mc.hpp"
#include "qanneal/rng.hpp"
#include "qanneal/schedule.hpp"
#include "qanneal/single_spin.hpp"
#include "qanneal/special_functions.hpp"
#include "qanneal/tsp.hpp"
