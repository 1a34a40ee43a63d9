func SomeFunction(n int) error {
	err := someWork()
	if err != nil {
		return err
	}
	var wg sync.WaitGroup
	wg.Add(1)
	go func() {
		defer wg.Done()
		// 'err' is a fresh declaration
		if err := Task1(n); err != nil {
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
