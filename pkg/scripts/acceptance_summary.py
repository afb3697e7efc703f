#!/usr/bin/env python3
"""
Render acceptance_info.json as a markdown summary for CI job pages
"""

import json
import os


def generate_summary():
    """Print the acceptance table in markdown"""
    try:
        with open('acceptance_info.json', 'r') as f:
            info = json.load(f)

        print(f'**Version:** {info["version"]}')
        print(f'**Seed:** {info["seed"]}')
        print(f'**Passed:** {info["passed"]}/{info["total"]}')
        print()
        print('### Acceptance criteria')
        print('| Criterion | Detail | Seconds | Status |')
        print('|-----------|--------|---------|--------|')

        for criterion, result in info['results'].items():
            if result['passed']:
                status = '✅ Pass' if result['seconds'] <= result['budget'] else '⚠️ Pass, over budget'
            else:
                status = '❌ Fail'
            print(f'| {criterion} | {result["detail"]} | {result["seconds"]} | {status} |')

        print()
        print(f'🗂️ **Run:** {os.environ.get("GITHUB_RUN_ID", "local")}')

    except Exception as e:
        print(f'❌ Error generating summary: {e}')
        return False

    return True


if __name__ == "__main__":
    exit(0 if generate_summary() else 1)
