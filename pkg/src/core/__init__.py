# This file allows the core directory to be treated as a package.
