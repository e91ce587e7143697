// Copyright 2026 The acomm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ACOMM_RESOURCES_H_
#define ACOMM_RESOURCES_H_

#include <string_view>

// Text resources from data/, compiled into the library.
namespace acomm::resources {

std::string_view CountriesTsv();
std::string_view NamesTxt();
std::string_view CompaniesTxt();

std::string_view AnswerTemplate();
std::string_view MessageTemplate();
std::string_view ReceiveTemplate();
std::string_view RefineTemplate();
std::string_view CotTemplate();

}  // namespace acomm::resources

#endif  // ACOMM_RESOURCES_H_
