import { ApiClient } from "./api";
import { createApp } from "./app";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
createApp(root, new ApiClient(""));
