package service

import (
	"errors"
	"sync"
)

var errTask = errors.New("task failed")

func someWork() error { return nil }

// Task1 validates the lower bound.
func Task1(n int) error {
	if n < 0 {
		return errTask
	}
	return nil
}

// Task2 validates the upper bound.
func Task2(n int) error {
	if n > 100 {
		return errTask
	}
	return nil
}

// SomeFunction checks n with both tasks in parallel.
func SomeFunction(n int) error {
	err := someWork()
	if err != nil {
		return err
	}
	var wg sync.WaitGroup
	wg.Add(1)
	go func() {
		defer wg.Done()
		// 'err' is captured by reference
		if err = Task1(n); err != nil {
			return
		}
	}()
	if err = Task2(n); err != nil {
		wg.Wait()
		return err
	}
	wg.Wait()
	return nil
}
