#!/usr/bin/env python3
"""
Floquet Chains - chain recurrence of periodic linear systems and their suspension flows
"""

from app.main import main

if __name__ == "__main__":
    exit(main())
